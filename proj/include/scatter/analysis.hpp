#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "scatter/histogram.hpp"
#include "scatter/theory.hpp"

namespace scatter {

// Windows used throughout: counts are summed (and the excitation
// reconstructed) on the first, the bandwidth fit runs on the second, which
// starts late enough to exclude the switch-on bin.
inline constexpr TimeWindow default_sum_window{-10e-9, 100e-9};
inline constexpr TimeWindow default_fit_window{2e-9, 100e-9};

// Raised when the bandwidth fit cannot converge or its normal equations are
// singular. CLI exit code 4.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-bin detection fractions with the heralding efficiency divided out;
// they sum to one over the normalization window.
struct NormalizedTrace {
  double t_start = 0.0;
  double bin_width = 0.0;
  Eigen::ArrayXd rates;
  double eta_f = 0.0;
  std::int64_t n_heralds = 0;
};

struct BandwidthFit {
  double gammap_hat = 0.0;
  double t0_hat = 0.0;  // held at the seed taken from the peak bin edge
  double amplitude_hat = 0.0;
  double sigma_gammap = 0.0;
  double sigma_t0 = 0.0;  // zero: t0 is not floated
  double sigma_amplitude = 0.0;
  TimeWindow fit_window{0.0, 0.0};
  double reduced_chi_square = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct ExtinctionEstimate {
  double epsilon_hat = 0.0;
  double sigma = 0.0;
  TimeWindow window{0.0, 0.0};
};

// Excited-state population at the bin centers, rebuilt from the count
// difference between the two histograms.
struct ExcitationTrace {
  Eigen::ArrayXd times;
  Eigen::ArrayXd p_e;
  Eigen::ArrayXd sigma;
  double lambda_used = 0.0;
  double gamma0_used = 0.0;
};

struct PeakEstimate {
  double value = 0.0;
  double sigma = 0.0;
  double time = 0.0;
};

struct BootstrapSummary {
  std::vector<double> epsilon_samples;
  std::vector<double> peak_samples;
  std::vector<double> peak_time_samples;
  Eigen::ArrayXd p_e_sigma;
  double epsilon_sigma = 0.0;
  double peak_sigma = 0.0;
  double peak_time_sigma = 0.0;
};

struct AnalysisOptions {
  TimeWindow sum_window = default_sum_window;
  TimeWindow fit_window = default_fit_window;
  int bootstrap_resamples = 0;  // 0 disables the bootstrap
  std::uint64_t seed = 0;
};

struct AnalysisResult {
  double eta_f = 0.0;
  BandwidthFit fit;
  ExtinctionEstimate extinction;
  ExcitationTrace excitation;
  PeakEstimate peak;
  // Closed-form predictions at the fitted bandwidth and the supplied atom.
  double epsilon_predicted = 0.0;
  double peak_predicted = 0.0;
  bool has_bootstrap = false;
  BootstrapSummary bootstrap;
  AnalysisOptions options;
};

// eta_f = (counts in window)/n_heralds; rates = counts/(n_heralds * eta_f).
NormalizedTrace normalize(const Histogram& hist, const TimeWindow& window);

// Weighted least-squares fit of amplitude * gp * exp(-gp (t - t0)) to the
// normalized reference trace on fit_window, Poisson sigmas, amplitude and gp
// free, t0 pinned to the left edge of the maximum-rate bin.
BandwidthFit fit_bandwidth(const NormalizedTrace& reference, const TimeWindow& fit_window);

// epsilon_hat = 1 - (counts_atom/N_atom)/(counts_ref/N_ref) over the window.
ExtinctionEstimate extinction(const Histogram& reference, const Histogram& with_atom,
                              const TimeWindow& window);

// March dP_e/dt = delta(t) - (1-lambda) gamma0 P_e across the window with the
// per-bin source delta_i = (G0_i/N0 - G_i/N)/(eta_f dt), eta_f taken from the
// reference histogram. Exact exponential update per bin; sigmas propagate the
// counting noise of both histograms with eta_f treated as fixed.
ExcitationTrace reconstruct_excitation(const Histogram& reference,
                                       const Histogram& with_atom,
                                       const AtomParams& atom, const TimeWindow& window);

// Highest point of the trace; a three-point parabola refines interior maxima.
// sigma is the propagated sigma of the peak bin (a bootstrap replaces it).
PeakEstimate extract_peak(const ExcitationTrace& trace);

// Poissonian bootstrap: every bin of both histograms is redrawn as
// Poisson(observed count) and the full pipeline rerun, one derived RNG
// substream per replica.
BootstrapSummary bootstrap_uncertainty(const Histogram& reference,
                                       const Histogram& with_atom, const AtomParams& atom,
                                       const AnalysisOptions& options);

// Full pipeline: normalization, bandwidth fit, extinction, excitation
// reconstruction, peak extraction, and (if requested) the bootstrap.
AnalysisResult analyze(const Histogram& reference, const Histogram& with_atom,
                       const AtomParams& atom, const AnalysisOptions& options);

}  // namespace scatter
