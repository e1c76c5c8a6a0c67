#pragma once

#include <algorithm>
#include <utility>

#include <Eigen/Dense>

namespace scatter::quadrature {

// 16-point Gauss-Legendre rule on [-1, 1], positive-half nodes.
inline constexpr double gl16_nodes[8] = {
    0.0950125098376374401853193, 0.2816035507792589132304605,
    0.4580167776572273863424194, 0.6178762444026437484466718,
    0.7554044083550030338951012, 0.8656312023878317438804679,
    0.9445750230732325760779884, 0.9894009349916499325961542,
};
inline constexpr double gl16_weights[8] = {
    0.1894506104550684962853967, 0.1826034150449235888667637,
    0.1691565193950025381893121, 0.1495959888165767320815017,
    0.1246289712555338720524763, 0.0951585116824927848099251,
    0.0622535239386478928628438, 0.0271524594117540948517806,
};

template <class F>
double gauss16(F&& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double dx = half * gl16_nodes[i];
    sum += gl16_weights[i] * (f(mid + dx) + f(mid - dx));
  }
  return half * sum;
}

// Integral of f over each bin [edges[i], edges[i+1]). f vanishes below
// support_start, so bins entirely below it are zero and the bin straddling
// it is clipped there; the rule never straddles the switch-on discontinuity.
template <class F>
Eigen::ArrayXd integrate_bins(F&& f, const Eigen::ArrayXd& edges, double support_start) {
  const Eigen::Index n = edges.size() - 1;
  Eigen::ArrayXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = edges[i + 1];
    if (hi <= support_start) {
      out[i] = 0.0;
      continue;
    }
    out[i] = gauss16(f, std::max(edges[i], support_start), hi);
  }
  return out;
}

}  // namespace scatter::quadrature
