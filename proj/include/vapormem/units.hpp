// units.hpp — Frequency conventions and small numeric helpers
//
// All public interfaces take ordinary frequencies in Hz; everything internal
// works in angular units (rad/s). Conversion happens exactly once, at the
// boundary, through the helpers below.

#pragma once

#include <cmath>
#include <numbers>

namespace vapormem {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double rad_from_hz(double hz) { return two_pi * hz; }
constexpr double hz_from_rad(double rad) { return rad / two_pi; }

inline constexpr double speed_of_light = 299'792'458.0; // m/s

constexpr double sqr(double x) { return x * x; }

} // namespace vapormem
