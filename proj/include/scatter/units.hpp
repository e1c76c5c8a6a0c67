#pragma once

namespace scatter {

inline constexpr double two_pi = 6.283185307179586476925286766559;

// Natural linewidth of the 87Rb D2 line, Gamma0/2pi = 6.07 MHz.
inline constexpr double rb87_d2_gamma0 = two_pi * 6.07e6;  // rad/s

// "linewidth/2pi in MHz" <-> angular rate in rad/s
constexpr double linewidth_mhz_to_angular(double mhz) { return two_pi * mhz * 1e6; }
constexpr double angular_to_linewidth_mhz(double w) { return w / (two_pi * 1e6); }

inline constexpr double ns = 1e-9;  // seconds

}  // namespace scatter
