#include "scatter/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "scatter/errors.hpp"

namespace scatter {

void TimeWindow::validate() const {
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || t_max <= t_min)
    throw ConfigError("window: need finite t_min < t_max");
}

Eigen::ArrayXd Histogram::centers() const {
  const Eigen::Index n = size();
  Eigen::ArrayXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = bin_center(i);
  return out;
}

Eigen::ArrayXd Histogram::edges() const {
  const Eigen::Index n = size();
  Eigen::ArrayXd out(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i)
    out[i] = t_start + bin_width * static_cast<double>(i);
  return out;
}

std::pair<Eigen::Index, Eigen::Index> bins_in_window(double t_start, double bin_width,
                                                     Eigen::Index n_bins,
                                                     const TimeWindow& w) {
  w.validate();
  const double lo = (w.t_min - t_start) / bin_width - 0.5;
  const double hi = (w.t_max - t_start) / bin_width - 0.5;
  Eigen::Index first = lo <= 0.0 ? 0 : static_cast<Eigen::Index>(std::ceil(lo));
  Eigen::Index last = hi <= 0.0 ? 0 : static_cast<Eigen::Index>(std::ceil(hi));
  first = std::min(first, n_bins);
  last = std::min(last, n_bins);
  if (first > last) first = last;
  return {first, last};
}

std::pair<Eigen::Index, Eigen::Index> Histogram::window_bins(const TimeWindow& w) const {
  return bins_in_window(t_start, bin_width, size(), w);
}

std::int64_t Histogram::window_sum(const TimeWindow& w) const {
  const auto [first, last] = window_bins(w);
  if (last == first) return 0;
  return counts.segment(first, last - first).sum();
}

bool Histogram::same_binning(const Histogram& other) const {
  if (size() != other.size()) return false;
  const double tol = 1e-9 * bin_width;
  return std::abs(t_start - other.t_start) <= tol &&
         std::abs(bin_width - other.bin_width) <= tol;
}

void Histogram::validate() const {
  if (!std::isfinite(t_start)) throw ConfigError("histogram: t_start must be finite");
  if (!std::isfinite(bin_width) || bin_width <= 0.0)
    throw ConfigError("histogram: bin_width must be finite and positive");
  if (size() == 0) throw ConfigError("histogram: no bins");
  if (n_heralds <= 0) throw ConfigError("histogram: n_heralds must be positive");
  if ((counts < 0).any()) throw ConfigError("histogram: negative count");
}

}  // namespace scatter
