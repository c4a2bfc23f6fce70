#pragma once

#include <string>
#include <string_view>

namespace cavitas {

enum class Dimension {
  Dimensionless,
  Length,
  Mass,
  Power,
  AngularFrequency,  // written as Hz-family (x 2pi) or rad/s
  Pressure,
  Temperature,
  Angle,
  Density,
  Time,
};

std::string_view to_string(Dimension dim);

/// Parses "<number> [suffix]" into SI. A bare number is taken as SI.
/// Throws UnitError for an unknown suffix or one of the wrong dimension,
/// ParseError when the numeric part is malformed.
double parse_quantity(std::string_view text, Dimension dim);

/// Shortest round-trippable representation with the SI base suffix.
std::string format_quantity(double si_value, Dimension dim);

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

}  // namespace cavitas
