#include "scatter/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "scatter/errors.hpp"
#include "scatter/random.hpp"

namespace scatter {

NormalizedTrace normalize(const Histogram& hist, const TimeWindow& window) {
  hist.validate();
  window.validate();
  const std::int64_t total = hist.window_sum(window);
  if (total <= 0) throw ConfigError("normalize: no counts in the summation window");
  const double eta =
      static_cast<double>(total) / static_cast<double>(hist.n_heralds);
  // Poisson draws can push the window total a little past n_heralds even when
  // the true efficiency is 1; only an excess far outside that fluctuation
  // band indicates inconsistent metadata.
  const double excess = static_cast<double>(total - hist.n_heralds);
  if (excess > 6.0 * std::sqrt(static_cast<double>(hist.n_heralds)))
    throw ConfigError("normalize: window counts exceed n_heralds by " +
                      std::to_string(excess) + ", eta_f = " + std::to_string(eta));
  NormalizedTrace trace;
  trace.t_start = hist.t_start;
  trace.bin_width = hist.bin_width;
  trace.eta_f = eta;
  trace.n_heralds = hist.n_heralds;
  // counts/(n_heralds * eta_f) with the product collapsed to the window total,
  // so the rates sum to 1 over the window up to a single rounding each.
  trace.rates = hist.counts.cast<double>() / static_cast<double>(total);
  return trace;
}

BandwidthFit fit_bandwidth(const NormalizedTrace& reference, const TimeWindow& fit_window) {
  const Eigen::Index n_bins = reference.rates.size();
  if (n_bins == 0) throw ConfigError("fit: empty trace");
  if (!(reference.eta_f > 0.0) || reference.n_heralds <= 0)
    throw ConfigError("fit: trace is not normalized");
  const auto [first, last] =
      bins_in_window(reference.t_start, reference.bin_width, n_bins, fit_window);
  const Eigen::Index n = last - first;
  if (n < 10) throw ConfigError("fit: need at least 10 bins in the fit window");

  // t0 pinned to the left edge of the maximum-rate bin: the envelope switches
  // on at a bin edge, so the fullest bin starts at the arrival time.
  Eigen::Index peak_bin = 0;
  for (Eigen::Index i = 1; i < n_bins; ++i)
    if (reference.rates[i] > reference.rates[peak_bin]) peak_bin = i;
  const double t0 = reference.t_start + reference.bin_width * static_cast<double>(peak_bin);

  const double scale = static_cast<double>(reference.n_heralds) * reference.eta_f;
  Eigen::ArrayXd u(n);      // t_i - t0 at bin centers
  Eigen::ArrayXd r(n);      // observed rates
  Eigen::ArrayXd sigma(n);  // Poisson sigma of each rate, sqrt(max(counts,1))/scale
  bool any_counts = false;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index i = first + j;
    u[j] = reference.t_start + reference.bin_width * (static_cast<double>(i) + 0.5) - t0;
    r[j] = reference.rates[i];
    const double counts = std::max(1.0, std::round(reference.rates[i] * scale));
    sigma[j] = std::sqrt(counts) / scale;
    any_counts = any_counts || reference.rates[i] > 0.0;
  }
  if (!any_counts) throw FitError("fit: all bins in the fit window are empty");

  // Start values: log-slope between the front and back quarters of the window.
  double gp = 0.0;
  {
    const Eigen::Index q = std::max<Eigen::Index>(1, n / 4);
    const double m1 = r.head(q).mean();
    const double m2 = r.tail(q).mean();
    const double tspan = u[n - 1 - (q - 1) / 2] - u[(q - 1) / 2];
    if (m1 > 0.0 && m2 > 0.0 && m1 > m2 && tspan > 0.0)
      gp = std::log(m1 / m2) / tspan;
    if (!(gp > 0.0)) gp = 2.0 / (u[n - 1] - u[0]);
  }
  double amp = r.maxCoeff() / (gp * std::exp(-gp * u[0]));
  if (!(amp > 0.0) || !std::isfinite(amp)) amp = reference.bin_width;

  // Levenberg-Marquardt in (ln amp, ln gp); the log scale keeps the normal
  // matrix well conditioned (amp is of order bin_width, gp of order 1e8).
  auto chi2_of = [&](double a, double g) {
    double c = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double res = (r[j] - a * g * std::exp(-g * u[j])) / sigma[j];
      c += res * res;
    }
    return c;
  };
  double chi2 = chi2_of(amp, gp);
  double lambda = 1e-3;
  int iterations = 0;
  bool converged = false;
  for (; iterations < 300; ++iterations) {
    double h00 = 0.0, h01 = 0.0, h11 = 0.0, g0v = 0.0, g1v = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double f = amp * gp * std::exp(-gp * u[j]);
      const double res = (r[j] - f) / sigma[j];
      const double ja = f / sigma[j];                       // d f / d ln amp
      const double jg = f * (1.0 - gp * u[j]) / sigma[j];   // d f / d ln gp
      h00 += ja * ja;
      h01 += ja * jg;
      h11 += jg * jg;
      g0v += ja * res;
      g1v += jg * res;
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const double a00 = h00 * (1.0 + lambda);
      const double a11 = h11 * (1.0 + lambda);
      const double det = a00 * a11 - h01 * h01;
      if (!(det > 0.0) || !std::isfinite(det)) {
        lambda *= 10.0;
        continue;
      }
      const double da = (a11 * g0v - h01 * g1v) / det;
      const double dg = (a00 * g1v - h01 * g0v) / det;
      const double amp_new = amp * std::exp(da);
      const double gp_new = gp * std::exp(dg);
      const double chi2_new = chi2_of(amp_new, gp_new);
      if (std::isfinite(chi2_new) && chi2_new <= chi2) {
        const bool small_step = std::max(std::abs(da), std::abs(dg)) < 1e-12;
        const bool small_gain = chi2 - chi2_new < 1e-14 * std::max(chi2, 1.0);
        amp = amp_new;
        gp = gp_new;
        chi2 = chi2_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (small_step || small_gain) converged = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e14) break;
    }
    if (converged) break;
    if (!stepped) {
      // No damping level improves chi^2: treat the current point as the
      // optimum if the gradient is already negligible.
      const double grad = std::hypot(g0v, g1v);
      if (grad < 1e-8 * std::sqrt(std::max(chi2, 1.0)) * std::sqrt(h00 + h11)) {
        converged = true;
        break;
      }
      char buf[160];
      std::snprintf(buf, sizeof(buf),
                    "fit: no converging step (iteration %d, amplitude %.6g, gammap %.6g, "
                    "chi2 %.6g)",
                    iterations, amp, gp, chi2);
      throw FitError(buf);
    }
  }
  if (!converged) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "fit: not converged after %d iterations (amplitude %.6g, gammap %.6g, "
                  "chi2 %.6g)",
                  iterations, amp, gp, chi2);
    throw FitError(buf);
  }

  // Fisher information at the optimum, inverted for the parameter covariance.
  double h00 = 0.0, h01 = 0.0, h11 = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double f = amp * gp * std::exp(-gp * u[j]);
    const double ja = f / sigma[j];
    const double jg = f * (1.0 - gp * u[j]) / sigma[j];
    h00 += ja * ja;
    h01 += ja * jg;
    h11 += jg * jg;
  }
  const double det = h00 * h11 - h01 * h01;
  if (!(det > 0.0)) throw FitError("fit: singular Fisher information at the optimum");

  BandwidthFit fit;
  fit.gammap_hat = gp;
  fit.t0_hat = t0;
  fit.amplitude_hat = amp;
  fit.sigma_gammap = gp * std::sqrt(h00 / det);
  fit.sigma_t0 = 0.0;
  fit.sigma_amplitude = amp * std::sqrt(h11 / det);
  fit.fit_window = fit_window;
  fit.reduced_chi_square = chi2 / static_cast<double>(n - 2);
  fit.iterations = iterations;
  fit.converged = converged;
  return fit;
}

ExtinctionEstimate extinction(const Histogram& reference, const Histogram& with_atom,
                              const TimeWindow& window) {
  reference.validate();
  with_atom.validate();
  if (!reference.same_binning(with_atom))
    throw ConfigError("extinction: histograms have different binning");
  const std::int64_t s0 = reference.window_sum(window);
  const std::int64_t s1 = with_atom.window_sum(window);
  if (s0 <= 0) throw ConfigError("extinction: reference window is empty");
  const double per0 = static_cast<double>(s0) / static_cast<double>(reference.n_heralds);
  const double per1 = static_cast<double>(s1) / static_cast<double>(with_atom.n_heralds);
  const double ratio = per1 / per0;
  ExtinctionEstimate est;
  est.epsilon_hat = 1.0 - ratio;
  est.sigma = ratio * std::sqrt(1.0 / static_cast<double>(std::max<std::int64_t>(s1, 1)) +
                                1.0 / static_cast<double>(s0));
  est.window = window;
  return est;
}

ExcitationTrace reconstruct_excitation(const Histogram& reference,
                                       const Histogram& with_atom,
                                       const AtomParams& atom, const TimeWindow& window) {
  reference.validate();
  with_atom.validate();
  atom.validate();
  if (!reference.same_binning(with_atom))
    throw ConfigError("reconstruct: histograms have different binning");
  const auto [first, last] = reference.window_bins(window);
  const Eigen::Index n = last - first;
  if (n < 1) throw ConfigError("reconstruct: window contains no bins");
  const std::int64_t total0 = reference.window_sum(window);
  if (total0 <= 0)
    throw ConfigError("reconstruct: eta_f is zero, no reference counts in window");

  const double n0 = static_cast<double>(reference.n_heralds);
  const double n1 = static_cast<double>(with_atom.n_heralds);
  const double eta = static_cast<double>(total0) / n0;
  const double dt = reference.bin_width;
  const double k = (1.0 - atom.overlap) * atom.gamma0;
  // Exact decay factors over a full and a half bin; the source enters as
  // delta * (1 - e^{-k dt})/k, which the expm1 form keeps accurate for small k dt.
  const double ef = std::exp(-k * dt);
  const double eh = std::exp(-0.5 * k * dt);
  const double uf = k > 0.0 ? -std::expm1(-k * dt) / k : dt;
  const double uh = k > 0.0 ? -std::expm1(-0.5 * k * dt) / k : 0.5 * dt;

  ExcitationTrace trace;
  trace.times.resize(n);
  trace.p_e.resize(n);
  trace.sigma.resize(n);
  trace.lambda_used = atom.overlap;
  trace.gamma0_used = atom.gamma0;
  double p = 0.0;  // population at the left edge of the current bin
  double v = 0.0;  // its variance from counting noise, eta_f held fixed
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index i = first + j;
    const double g0 = static_cast<double>(reference.counts[i]) / n0;
    const double g1 = static_cast<double>(with_atom.counts[i]) / n1;
    const double delta = (g0 - g1) / (eta * dt);
    const double var_delta =
        (static_cast<double>(std::max<std::int64_t>(reference.counts[i], 1)) / (n0 * n0) +
         static_cast<double>(std::max<std::int64_t>(with_atom.counts[i], 1)) / (n1 * n1)) /
        (eta * dt * eta * dt);
    trace.times[j] = reference.bin_center(i);
    trace.p_e[j] = p * eh + delta * uh;
    trace.sigma[j] = std::sqrt(v * eh * eh + var_delta * uh * uh);
    p = p * ef + delta * uf;
    v = v * ef * ef + var_delta * uf * uf;
  }
  return trace;
}

PeakEstimate extract_peak(const ExcitationTrace& trace) {
  const Eigen::Index n = trace.p_e.size();
  if (n < 3) throw ConfigError("peak: trace must have at least 3 bins");
  Eigen::Index m = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (trace.p_e[i] > trace.p_e[m]) m = i;

  PeakEstimate peak;
  peak.value = trace.p_e[m];
  peak.time = trace.times[m];
  peak.sigma = trace.sigma.size() == n ? trace.sigma[m] : 0.0;
  if (m > 0 && m + 1 < n) {
    const double ym = trace.p_e[m - 1];
    const double y0 = trace.p_e[m];
    const double yp = trace.p_e[m + 1];
    const double denom = ym - 2.0 * y0 + yp;
    if (denom < 0.0) {
      const double offset = 0.5 * (ym - yp) / denom;  // in bins, within [-1/2, 1/2]
      if (std::abs(offset) <= 0.5) {
        const double dt = trace.times[m] - trace.times[m - 1];
        peak.time = trace.times[m] + offset * dt;
        peak.value = y0 - 0.125 * (ym - yp) * (ym - yp) / denom;
      }
    }
  }
  return peak;
}

namespace {

double sample_std(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

}  // namespace

BootstrapSummary bootstrap_uncertainty(const Histogram& reference,
                                       const Histogram& with_atom, const AtomParams& atom,
                                       const AnalysisOptions& options) {
  if (options.bootstrap_resamples < 100)
    throw ConfigError("bootstrap: need at least 100 resamples, got " +
                      std::to_string(options.bootstrap_resamples));
  reference.validate();
  with_atom.validate();
  if (!reference.same_binning(with_atom))
    throw ConfigError("bootstrap: histograms have different binning");

  const int n_resamples = options.bootstrap_resamples;
  const std::uint64_t base = derive_stream(options.seed, stream_tag::bootstrap);
  BootstrapSummary summary;
  summary.epsilon_samples.reserve(n_resamples);
  summary.peak_samples.reserve(n_resamples);
  summary.peak_time_samples.reserve(n_resamples);

  Histogram ref_r = reference;
  Histogram atom_r = with_atom;
  Eigen::ArrayXd pe_mean;
  Eigen::ArrayXd pe_m2;
  for (int rep = 0; rep < n_resamples; ++rep) {
    Rng rng(derive_stream(base, static_cast<std::uint64_t>(rep)));
    for (Eigen::Index i = 0; i < reference.size(); ++i)
      ref_r.counts[i] = rng.poisson(static_cast<double>(reference.counts[i]));
    for (Eigen::Index i = 0; i < with_atom.size(); ++i)
      atom_r.counts[i] = rng.poisson(static_cast<double>(with_atom.counts[i]));

    const ExtinctionEstimate est = extinction(ref_r, atom_r, options.sum_window);
    const ExcitationTrace trace =
        reconstruct_excitation(ref_r, atom_r, atom, options.sum_window);
    const PeakEstimate peak = extract_peak(trace);

    summary.epsilon_samples.push_back(est.epsilon_hat);
    summary.peak_samples.push_back(peak.value);
    summary.peak_time_samples.push_back(peak.time);
    if (rep == 0) {
      pe_mean = Eigen::ArrayXd::Zero(trace.p_e.size());
      pe_m2 = Eigen::ArrayXd::Zero(trace.p_e.size());
    }
    // Welford update, replicas in fixed order
    const Eigen::ArrayXd d1 = trace.p_e - pe_mean;
    pe_mean += d1 / static_cast<double>(rep + 1);
    pe_m2 += d1 * (trace.p_e - pe_mean);
  }
  summary.p_e_sigma = (pe_m2 / static_cast<double>(n_resamples - 1)).sqrt();
  summary.epsilon_sigma = sample_std(summary.epsilon_samples);
  summary.peak_sigma = sample_std(summary.peak_samples);
  summary.peak_time_sigma = sample_std(summary.peak_time_samples);
  return summary;
}

AnalysisResult analyze(const Histogram& reference, const Histogram& with_atom,
                       const AtomParams& atom, const AnalysisOptions& options) {
  atom.validate();
  AnalysisResult result;
  result.options = options;
  const NormalizedTrace trace = normalize(reference, options.sum_window);
  result.eta_f = trace.eta_f;
  result.fit = fit_bandwidth(trace, options.fit_window);
  result.extinction = extinction(reference, with_atom, options.sum_window);
  result.excitation = reconstruct_excitation(reference, with_atom, atom, options.sum_window);
  result.peak = extract_peak(result.excitation);
  const PhotonParams fitted{result.fit.gammap_hat, result.fit.t0_hat};
  result.epsilon_predicted = theory::scattering_probability(atom, fitted);
  result.peak_predicted = theory::peak_excitation(atom, fitted);
  if (options.bootstrap_resamples > 0) {
    result.bootstrap = bootstrap_uncertainty(reference, with_atom, atom, options);
    result.has_bootstrap = true;
    result.peak.sigma = result.bootstrap.peak_sigma;
  }
  return result;
}

}  // namespace scatter
