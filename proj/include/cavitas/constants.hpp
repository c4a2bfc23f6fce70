#pragma once

#include <numbers>

namespace cavitas {

/// CODATA 2018 exact or recommended values, SI.
struct PhysConstants {
  static constexpr double hbar = 1.054571817e-34;   // J s
  static constexpr double kB = 1.380649e-23;        // J/K
  static constexpr double c = 299792458.0;          // m/s
  static constexpr double eps0 = 8.8541878128e-12;  // F/m
};

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr double hz_to_rad(double hz) { return kTwoPi * hz; }
constexpr double rad_to_hz(double rad_s) { return rad_s / kTwoPi; }

}  // namespace cavitas
