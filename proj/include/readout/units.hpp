#pragma once

#include <numbers>

namespace readout {

// Internal convention: angular frequencies in rad/s, times in seconds.
// All file and CLI interfaces speak Hz; conversion happens at that boundary only.

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double hz_to_rad(double f_hz) { return two_pi * f_hz; }
constexpr double rad_to_hz(double w) { return w / two_pi; }
constexpr double mhz_to_rad(double f_mhz) { return two_pi * f_mhz * 1e6; }
constexpr double rad_to_mhz(double w) { return w / (two_pi * 1e6); }

} // namespace readout
