#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "scatter/histogram.hpp"
#include "scatter/theory.hpp"

namespace scatter {

// One heralded-photon transmission experiment: n_heralds trigger events, a
// coincidence histogram of forward-detector clicks, per-bin Poisson counts.
struct SimConfig {
  AtomParams atom;
  PhotonParams photon;
  std::int64_t n_heralds = 0;
  double heralding_efficiency = 1.0;
  double background_rate = 0.0;  // uniform accidental rate (Hz) per herald window
  TimeWindow window{-10e-9, 100e-9};
  double bin_width = 1e-9;
  std::uint64_t seed = 0;
  double edge_smearing = 0.0;  // exponential detector response time, 0 = ideal

  Eigen::Index bin_count() const;
  void validate() const;
};

struct SimDiagnostics {
  std::int64_t clamped_bins = 0;    // bins whose tiny negative mean was clipped to 0
  double envelope_coverage = 0.0;   // photon mass arriving inside the histogram span
  bool truncation_warning = false;  // coverage below 0.99
};

// Per-herald transmitted rate at time t, with the detector edge response
// folded in when config.edge_smearing > 0.
double reference_rate(double t, const SimConfig& config);
double with_atom_rate(double t, const SimConfig& config);

// Expected count in each bin (the Poisson mean), including heralding
// efficiency and background.
Eigen::ArrayXd expected_bin_means_reference(const SimConfig& config);
Eigen::ArrayXd expected_bin_means_with_atom(const SimConfig& config);

// Draw one experiment: independent Poisson counts in every bin, from the
// substream of config.seed named by the histogram label.
Histogram simulate_reference(const SimConfig& config, SimDiagnostics* diag = nullptr);
Histogram simulate_with_atom(const SimConfig& config, SimDiagnostics* diag = nullptr);

// Convolve point samples on a grid of step dt with the zero-mean exponential
// edge response of time constant tau. The response reaches tau below a sharp
// edge but does not shift it on average; samples outside the grid are zero.
Eigen::ArrayXd apply_edge_smearing(const Eigen::ArrayXd& samples, double dt, double tau);

}  // namespace scatter
