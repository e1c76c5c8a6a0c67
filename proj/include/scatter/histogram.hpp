#pragma once

#include <cstdint>
#include <utility>

#include <Eigen/Dense>

namespace scatter {

// Half-open time interval [t_min, t_max).
struct TimeWindow {
  double t_min;
  double t_max;

  double length() const { return t_max - t_min; }
  void validate() const;
};

enum class HistLabel { reference, with_atom };

// Index range [first, last) of the bins of a uniform grid whose centers fall
// inside w. center(i) = t_start + (i + 0.5) * bin_width; the half-bin offset
// keeps the cutoffs away from representable edge values, so rounding in the
// division cannot flip a bin in or out.
std::pair<Eigen::Index, Eigen::Index> bins_in_window(double t_start, double bin_width,
                                                     Eigen::Index n_bins,
                                                     const TimeWindow& w);

// Coincidence histogram of detection delays relative to the herald, with
// uniform bins covering [t_start, t_start + size()*bin_width).
struct Histogram {
  double t_start = 0.0;
  double bin_width = 0.0;
  Eigen::Array<std::int64_t, Eigen::Dynamic, 1> counts;
  std::int64_t n_heralds = 0;
  HistLabel label = HistLabel::reference;

  Eigen::Index size() const { return counts.size(); }
  double t_end() const { return t_start + bin_width * static_cast<double>(size()); }
  double bin_center(Eigen::Index i) const {
    return t_start + bin_width * (static_cast<double>(i) + 0.5);
  }
  Eigen::ArrayXd centers() const;
  Eigen::ArrayXd edges() const;

  // Index range [first, last) of the bins whose centers fall inside w.
  std::pair<Eigen::Index, Eigen::Index> window_bins(const TimeWindow& w) const;
  std::int64_t window_sum(const TimeWindow& w) const;

  bool same_binning(const Histogram& other) const;
  void validate() const;
};

}  // namespace scatter
