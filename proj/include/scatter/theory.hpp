#pragma once

#include <Eigen/Dense>

namespace scatter {

// Two-level atom coupled to a free-space photon mode.
// overlap is the spatial mode-match Lambda between the focused field and the
// atomic dipole radiation pattern; gamma0 and omega0 are the natural linewidth
// and resonance frequency. All rates and frequencies are angular (rad/s).
struct AtomParams {
  double gamma0;
  double overlap;
  double omega0 = 0.0;

  void validate() const;
};

// Exponentially rising single-photon wave packet of bandwidth gammap whose
// envelope switches on at t0.
struct PhotonParams {
  double gammap;
  double t0 = 0.0;

  void validate() const;
};

enum class CurveKind { envelope, excitation, scattered_rate };

// Closed-form curve sampled on a time grid.
struct TheoryCurve {
  Eigen::ArrayXd times;
  Eigen::ArrayXd values;
  CurveKind kind;

  void validate() const;
};

namespace theory {

// Relative |gammap - gamma0| below which the degenerate closed forms replace
// the generic ones, whose leading coefficient diverges as the rates coincide.
inline constexpr double degeneracy_threshold = 1e-6;

bool nearly_degenerate(double gamma0, double gammap);

// Unit-normalized Lorentzian power spectrum of the photon; peaks at 2/(pi*gammap).
double lorentzian_spectrum(double omega, double omega0, double gammap);

// Total scattering probability epsilon = 4*L*(1-L)*g0/(g0+gp).
double scattering_probability(const AtomParams& atom, const PhotonParams& photon);

// Normalized instantaneous photon flux gp*exp(-gp*(t-t0)) for t >= t0, else 0.
double photon_envelope(double t, const PhotonParams& photon);

// Excited-state population P_e(t) for the decaying-exponential drive.
double excited_population(double t, const AtomParams& atom, const PhotonParams& photon);

// max_t P_e(t).
double peak_excitation(const AtomParams& atom, const PhotonParams& photon);

// Time at which P_e attains its maximum.
double peak_time(const AtomParams& atom, const PhotonParams& photon);

// Instantaneous scattered-photon rate dP_e/dt + (1-L)*g0*P_e. Integrates to
// the scattering probability; can dip below zero in the tail when gp exceeds
// (1-L)*g0, where stimulated re-emission into the mode outruns free decay.
double scattered_rate(double t, const AtomParams& atom, const PhotonParams& photon);

TheoryCurve sample_envelope(const Eigen::ArrayXd& times, const PhotonParams& photon);
TheoryCurve sample_excitation(const Eigen::ArrayXd& times, const AtomParams& atom,
                              const PhotonParams& photon);
TheoryCurve sample_scattered_rate(const Eigen::ArrayXd& times, const AtomParams& atom,
                                  const PhotonParams& photon);

}  // namespace theory

}  // namespace scatter
