#include "scatter/theory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "scatter/errors.hpp"

namespace scatter {

void AtomParams::validate() const {
  if (!std::isfinite(gamma0) || gamma0 <= 0.0)
    throw ConfigError("atom: gamma0 must be finite and positive, got " + std::to_string(gamma0));
  if (!std::isfinite(overlap) || overlap < 0.0 || overlap > 1.0)
    throw ConfigError("atom: overlap must lie in [0, 1], got " + std::to_string(overlap));
  if (!std::isfinite(omega0))
    throw ConfigError("atom: omega0 must be finite");
}

void PhotonParams::validate() const {
  if (!std::isfinite(gammap) || gammap <= 0.0)
    throw ConfigError("photon: gammap must be finite and positive, got " + std::to_string(gammap));
  if (!std::isfinite(t0)) throw ConfigError("photon: t0 must be finite");
}

void TheoryCurve::validate() const {
  if (times.size() != values.size())
    throw ConfigError("curve: times and values differ in length");
  if (times.size() == 0) throw ConfigError("curve: empty");
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || !std::isfinite(values[i]))
      throw ConfigError("curve: non-finite entry at index " + std::to_string(i));
    if (i > 0 && times[i] <= times[i - 1])
      throw ConfigError("curve: times must be strictly increasing");
  }
  // The scattered rate legitimately goes negative in the tail; the other two
  // curves are probabilities or probability densities.
  if (kind != CurveKind::scattered_rate && (values < 0.0).any())
    throw ConfigError("curve: negative value in a non-negative curve");
}

namespace theory {

bool nearly_degenerate(double gamma0, double gammap) {
  return std::abs(gammap - gamma0) < degeneracy_threshold * gamma0;
}

double lorentzian_spectrum(double omega, double omega0, double gammap) {
  const double d = omega - omega0;
  return (gammap / (2.0 * std::numbers::pi)) / (d * d + 0.25 * gammap * gammap);
}

double scattering_probability(const AtomParams& atom, const PhotonParams& photon) {
  return 4.0 * atom.overlap * (1.0 - atom.overlap) * atom.gamma0 /
         (atom.gamma0 + photon.gammap);
}

double photon_envelope(double t, const PhotonParams& photon) {
  const double tau = t - photon.t0;
  if (tau < 0.0) return 0.0;
  return photon.gammap * std::exp(-photon.gammap * tau);
}

double excited_population(double t, const AtomParams& atom, const PhotonParams& photon) {
  const double tau = t - photon.t0;
  if (tau < 0.0) return 0.0;
  const double g0 = atom.gamma0;
  const double gp = photon.gammap;
  const double lam = atom.overlap;
  if (nearly_degenerate(g0, gp)) {
    const double x = g0 * tau;
    return lam * x * x * std::exp(-x);
  }
  const double d = gp - g0;
  // exp(-g0 tau/2) - exp(-gp tau/2), kept cancellation-free near degeneracy
  const double diff = -std::exp(-0.5 * g0 * tau) * std::expm1(-0.5 * d * tau);
  return 4.0 * lam * g0 * gp / (d * d) * diff * diff;
}

double peak_excitation(const AtomParams& atom, const PhotonParams& photon) {
  const double g0 = atom.gamma0;
  const double gp = photon.gammap;
  const double lam = atom.overlap;
  if (nearly_degenerate(g0, gp)) return 4.0 * lam * std::exp(-2.0);
  const double rho = gp / g0;
  return 4.0 * lam * std::pow(rho, (g0 + gp) / (g0 - gp));
}

double peak_time(const AtomParams& atom, const PhotonParams& photon) {
  const double g0 = atom.gamma0;
  const double gp = photon.gammap;
  if (nearly_degenerate(g0, gp)) return photon.t0 + 2.0 / g0;
  return photon.t0 + 2.0 * std::log(gp / g0) / (gp - g0);
}

double scattered_rate(double t, const AtomParams& atom, const PhotonParams& photon) {
  const double tau = t - photon.t0;
  if (tau < 0.0) return 0.0;
  const double g0 = atom.gamma0;
  const double gp = photon.gammap;
  const double lam = atom.overlap;
  if (nearly_degenerate(g0, gp)) {
    const double x = g0 * tau;
    return lam * g0 * x * std::exp(-x) * (2.0 - lam * x);
  }
  // dP_e/dt + (1-lam) g0 P_e with a = exp(-g0 tau/2), b = exp(-gp tau/2)
  // collapses to A (a-b) (d b + lam g0 (b-a)), A = 4 lam g0 gp / d^2.
  const double d = gp - g0;
  const double a = std::exp(-0.5 * g0 * tau);
  const double e1 = std::expm1(-0.5 * d * tau);  // b/a - 1
  const double b = a * (1.0 + e1);
  const double amb = -a * e1;
  return 4.0 * lam * g0 * gp / (d * d) * amb * (d * b + lam * g0 * a * e1);
}

namespace {

template <class F>
TheoryCurve sample(const Eigen::ArrayXd& times, CurveKind kind, F&& f) {
  TheoryCurve curve;
  curve.times = times;
  curve.values = times.unaryExpr(std::forward<F>(f));
  curve.kind = kind;
  curve.validate();
  return curve;
}

}  // namespace

TheoryCurve sample_envelope(const Eigen::ArrayXd& times, const PhotonParams& photon) {
  photon.validate();
  return sample(times, CurveKind::envelope,
                [&](double t) { return photon_envelope(t, photon); });
}

TheoryCurve sample_excitation(const Eigen::ArrayXd& times, const AtomParams& atom,
                              const PhotonParams& photon) {
  atom.validate();
  photon.validate();
  return sample(times, CurveKind::excitation,
                [&](double t) { return excited_population(t, atom, photon); });
}

TheoryCurve sample_scattered_rate(const Eigen::ArrayXd& times, const AtomParams& atom,
                                  const PhotonParams& photon) {
  atom.validate();
  photon.validate();
  return sample(times, CurveKind::scattered_rate,
                [&](double t) { return scattered_rate(t, atom, photon); });
}

}  // namespace theory

}  // namespace scatter
