#include "scatter/simulate.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "scatter/errors.hpp"
#include "scatter/quadrature.hpp"
#include "scatter/random.hpp"

namespace scatter {

Eigen::Index SimConfig::bin_count() const {
  return static_cast<Eigen::Index>(std::llround(window.length() / bin_width));
}

void SimConfig::validate() const {
  atom.validate();
  photon.validate();
  window.validate();
  if (n_heralds <= 0) throw ConfigError("sim: n_heralds must be positive");
  if (!std::isfinite(heralding_efficiency) || heralding_efficiency <= 0.0 ||
      heralding_efficiency > 1.0)
    throw ConfigError("sim: heralding_efficiency must lie in (0, 1]");
  if (!std::isfinite(background_rate) || background_rate < 0.0)
    throw ConfigError("sim: background_rate must be finite and non-negative");
  if (!std::isfinite(bin_width) || bin_width <= 0.0)
    throw ConfigError("sim: bin_width must be finite and positive");
  const double ratio = window.length() / bin_width;
  const Eigen::Index n = bin_count();
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-6)
    throw ConfigError("sim: window length must be a whole number of bins");
  if (!std::isfinite(edge_smearing) || edge_smearing < 0.0)
    throw ConfigError("sim: edge_smearing must be finite and non-negative");
}

namespace {

// Smeared value of x^p exp(-lambda x) theta(x) under the zero-mean
// exponential edge response of time constant tau, evaluated at
// theta = (t - t0) + tau; the result vanishes for theta <= 0. p in {0,1,2}.
double smeared_power_exp(int p, double lambda, double theta, double tau) {
  if (theta <= 0.0) return 0.0;
  const double mu = 1.0 / tau - lambda;
  const double z = mu * theta;
  if (std::abs(z) < 0.5) {
    // (theta^{p+1}/tau) e^{-theta/tau} sum_k z^k / (k! (k+p+1)); the closed
    // forms below lose all digits as mu -> 0.
    double term = 1.0;
    double sum = 0.0;
    for (int k = 0; k < 34; ++k) {
      sum += term / static_cast<double>(k + p + 1);
      term *= z / static_cast<double>(k + 1);
      if (std::abs(term) < 1e-18) break;
    }
    return std::pow(theta, p + 1) / tau * std::exp(-theta / tau) * sum;
  }
  const double ea = std::exp(-lambda * theta);
  const double eb = std::exp(-theta / tau);
  switch (p) {
    case 0:
      return (ea - eb) / (mu * tau);
    case 1:
      return (ea * (theta - 1.0 / mu) + eb / mu) / (mu * tau);
    default:
      return (ea * (theta * theta - 2.0 * theta / mu + 2.0 / (mu * mu)) -
              eb * 2.0 / (mu * mu)) /
             (mu * tau);
  }
}

struct RateComponent {
  double coeff;
  double rate;
  int power;  // power of (t - t0) multiplying the exponential
};

std::vector<RateComponent> with_atom_components(const AtomParams& atom,
                                                const PhotonParams& photon) {
  const double g0 = atom.gamma0;
  const double gp = photon.gammap;
  const double lam = atom.overlap;
  if (theory::nearly_degenerate(g0, gp)) {
    // g0 (1 - lam g0 x)^2 e^{-g0 x}, x = t - t0
    return {{g0, g0, 0},
            {-2.0 * lam * g0 * g0, g0, 1},
            {lam * lam * g0 * g0 * g0, g0, 2}};
  }
  const double d = g0 - gp;
  const double big_a = 4.0 * lam * g0 * gp / (d * d);
  const double c = gp - (1.0 - lam) * g0;
  return {{gp + big_a * c, gp, 0},
          {big_a * lam * g0, g0, 0},
          {-big_a * (c + lam * g0), 0.5 * (g0 + gp), 0}};
}

double envelope_mass_in_window(const SimConfig& config) {
  auto cdf = [&](double t) {
    const double x = (t - config.photon.t0) * config.photon.gammap;
    return x <= 0.0 ? 0.0 : -std::expm1(-x);
  };
  return cdf(config.window.t_max) - cdf(config.window.t_min);
}

Eigen::ArrayXd expected_means(const SimConfig& config, bool with_atom,
                              SimDiagnostics* diag) {
  config.validate();
  const Eigen::Index n = config.bin_count();
  Eigen::ArrayXd edges(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i)
    edges[i] = config.window.t_min + config.bin_width * static_cast<double>(i);
  const double support = config.photon.t0 - config.edge_smearing;
  auto rate = [&](double t) {
    return with_atom ? with_atom_rate(t, config) : reference_rate(t, config);
  };
  Eigen::ArrayXd mass = quadrature::integrate_bins(rate, edges, support);
  std::int64_t clamped = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mass[i] < 0.0) {
      mass[i] = 0.0;
      ++clamped;
    }
  }
  if (diag) {
    diag->clamped_bins += clamped;
    diag->envelope_coverage = envelope_mass_in_window(config);
    diag->truncation_warning = diag->envelope_coverage < 0.99;
  }
  return static_cast<double>(config.n_heralds) *
         (config.heralding_efficiency * mass +
          config.background_rate * config.bin_width);
}

Histogram draw(const SimConfig& config, const Eigen::ArrayXd& means,
               std::uint64_t tag, HistLabel label) {
  Rng rng(derive_stream(config.seed, tag));
  Histogram h;
  h.t_start = config.window.t_min;
  h.bin_width = config.bin_width;
  h.n_heralds = config.n_heralds;
  h.label = label;
  h.counts.resize(means.size());
  for (Eigen::Index i = 0; i < means.size(); ++i) h.counts[i] = rng.poisson(means[i]);
  return h;
}

}  // namespace

double reference_rate(double t, const SimConfig& config) {
  if (config.edge_smearing <= 0.0) return theory::photon_envelope(t, config.photon);
  const double theta = t - config.photon.t0 + config.edge_smearing;
  return config.photon.gammap *
         smeared_power_exp(0, config.photon.gammap, theta, config.edge_smearing);
}

double with_atom_rate(double t, const SimConfig& config) {
  const double g0 = config.atom.gamma0;
  const double gp = config.photon.gammap;
  const double lam = config.atom.overlap;
  if (config.edge_smearing <= 0.0) {
    const double tau = t - config.photon.t0;
    if (tau < 0.0) return 0.0;
    // envelope minus scattered rate, collapsed to a manifestly non-negative
    // perfect square
    if (theory::nearly_degenerate(g0, gp)) {
      const double root = 1.0 - lam * g0 * tau;
      return g0 * std::exp(-g0 * tau) * root * root;
    }
    const double d = g0 - gp;
    const double a = std::exp(-0.5 * g0 * tau);
    const double b = std::exp(-0.5 * gp * tau);
    const double root = 2.0 * lam * g0 * a + (d - 2.0 * lam * g0) * b;
    return gp * root * root / (d * d);
  }
  const double theta = t - config.photon.t0 + config.edge_smearing;
  double sum = 0.0;
  for (const auto& c : with_atom_components(config.atom, config.photon))
    sum += c.coeff * smeared_power_exp(c.power, c.rate, theta, config.edge_smearing);
  return sum;
}

Eigen::ArrayXd expected_bin_means_reference(const SimConfig& config) {
  return expected_means(config, false, nullptr);
}

Eigen::ArrayXd expected_bin_means_with_atom(const SimConfig& config) {
  return expected_means(config, true, nullptr);
}

Histogram simulate_reference(const SimConfig& config, SimDiagnostics* diag) {
  const Eigen::ArrayXd means = expected_means(config, false, diag);
  return draw(config, means, stream_tag::reference, HistLabel::reference);
}

Histogram simulate_with_atom(const SimConfig& config, SimDiagnostics* diag) {
  const Eigen::ArrayXd means = expected_means(config, true, diag);
  return draw(config, means, stream_tag::with_atom, HistLabel::with_atom);
}

Eigen::ArrayXd apply_edge_smearing(const Eigen::ArrayXd& samples, double dt, double tau) {
  if (!std::isfinite(dt) || dt <= 0.0)
    throw ConfigError("smearing: dt must be finite and positive");
  if (!std::isfinite(tau) || tau < 0.0)
    throw ConfigError("smearing: tau must be finite and non-negative");
  if (tau == 0.0 || samples.size() == 0) return samples;

  // Cell k collects the response mass between shifts (k -/+ 0.5) dt; the
  // response starts at shift -tau, so k can be negative.
  const int k_min = static_cast<int>(std::floor(-tau / dt - 0.5)) + 1;
  std::vector<int> shifts;
  std::vector<double> weights;
  for (int k = k_min;; ++k) {
    const double lo = std::max((static_cast<double>(k) - 0.5) * dt, -tau);
    const double hi = (static_cast<double>(k) + 0.5) * dt;
    double w = std::exp(-(lo + tau) / tau) - std::exp(-(hi + tau) / tau);
    const double tail = std::exp(-(hi + tau) / tau);
    if (tail < 1e-16) {
      shifts.push_back(k);
      weights.push_back(w + tail);
      break;
    }
    shifts.push_back(k);
    weights.push_back(w);
  }

  const Eigen::Index n = samples.size();
  Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n);
  for (std::size_t j = 0; j < weights.size(); ++j) {
    const Eigen::Index k = shifts[j];
    const double w = weights[j];
    const Eigen::Index first = std::max<Eigen::Index>(0, k);
    const Eigen::Index last = std::min<Eigen::Index>(n, n + k);
    for (Eigen::Index i = first; i < last; ++i) out[i] += w * samples[i - k];
  }
  return out;
}

}  // namespace scatter
