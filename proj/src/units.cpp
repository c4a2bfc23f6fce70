#include "cavitas/units.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include "cavitas/constants.hpp"
#include "cavitas/errors.hpp"

namespace cavitas {
namespace {

struct UnitEntry {
  std::string_view suffix;
  Dimension dim;
  double factor;
};

// Each suffix appears once; the factor converts to SI (angular frequency: rad/s).
constexpr std::array kUnits = {
    UnitEntry{"m", Dimension::Length, 1.0},
    UnitEntry{"cm", Dimension::Length, 1e-2},
    UnitEntry{"mm", Dimension::Length, 1e-3},
    UnitEntry{"um", Dimension::Length, 1e-6},
    UnitEntry{"µm", Dimension::Length, 1e-6},
    UnitEntry{"nm", Dimension::Length, 1e-9},
    UnitEntry{"pm", Dimension::Length, 1e-12},
    UnitEntry{"kg", Dimension::Mass, 1.0},
    UnitEntry{"g", Dimension::Mass, 1e-3},
    UnitEntry{"mg", Dimension::Mass, 1e-6},
    UnitEntry{"ug", Dimension::Mass, 1e-9},
    UnitEntry{"µg", Dimension::Mass, 1e-9},
    UnitEntry{"ng", Dimension::Mass, 1e-12},
    UnitEntry{"pg", Dimension::Mass, 1e-15},
    UnitEntry{"fg", Dimension::Mass, 1e-18},
    UnitEntry{"W", Dimension::Power, 1.0},
    UnitEntry{"kW", Dimension::Power, 1e3},
    UnitEntry{"mW", Dimension::Power, 1e-3},
    UnitEntry{"uW", Dimension::Power, 1e-6},
    UnitEntry{"µW", Dimension::Power, 1e-6},
    UnitEntry{"rad/s", Dimension::AngularFrequency, 1.0},
    UnitEntry{"Hz", Dimension::AngularFrequency, kTwoPi},
    UnitEntry{"kHz", Dimension::AngularFrequency, kTwoPi * 1e3},
    UnitEntry{"MHz", Dimension::AngularFrequency, kTwoPi * 1e6},
    UnitEntry{"GHz", Dimension::AngularFrequency, kTwoPi * 1e9},
    UnitEntry{"THz", Dimension::AngularFrequency, kTwoPi * 1e12},
    UnitEntry{"Pa", Dimension::Pressure, 1.0},
    UnitEntry{"hPa", Dimension::Pressure, 1e2},
    UnitEntry{"kPa", Dimension::Pressure, 1e3},
    UnitEntry{"mbar", Dimension::Pressure, 1e2},
    UnitEntry{"bar", Dimension::Pressure, 1e5},
    UnitEntry{"Torr", Dimension::Pressure, 101325.0 / 760.0},
    UnitEntry{"K", Dimension::Temperature, 1.0},
    UnitEntry{"rad", Dimension::Angle, 1.0},
    UnitEntry{"mrad", Dimension::Angle, 1e-3},
    UnitEntry{"deg", Dimension::Angle, std::numbers::pi / 180.0},
    UnitEntry{"kg/m3", Dimension::Density, 1.0},
    UnitEntry{"kg/m^3", Dimension::Density, 1.0},
    UnitEntry{"g/cm3", Dimension::Density, 1e3},
    UnitEntry{"g/cm^3", Dimension::Density, 1e3},
    UnitEntry{"s", Dimension::Time, 1.0},
    UnitEntry{"ms", Dimension::Time, 1e-3},
    UnitEntry{"us", Dimension::Time, 1e-6},
    UnitEntry{"µs", Dimension::Time, 1e-6},
    UnitEntry{"ns", Dimension::Time, 1e-9},
};

std::string_view si_suffix(Dimension dim) {
  switch (dim) {
    case Dimension::Dimensionless: return "";
    case Dimension::Length: return "m";
    case Dimension::Mass: return "kg";
    case Dimension::Power: return "W";
    case Dimension::AngularFrequency: return "rad/s";
    case Dimension::Pressure: return "Pa";
    case Dimension::Temperature: return "K";
    case Dimension::Angle: return "rad";
    case Dimension::Density: return "kg/m3";
    case Dimension::Time: return "s";
  }
  return "";
}

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view to_string(Dimension dim) {
  switch (dim) {
    case Dimension::Dimensionless: return "dimensionless";
    case Dimension::Length: return "length";
    case Dimension::Mass: return "mass";
    case Dimension::Power: return "power";
    case Dimension::AngularFrequency: return "frequency";
    case Dimension::Pressure: return "pressure";
    case Dimension::Temperature: return "temperature";
    case Dimension::Angle: return "angle";
    case Dimension::Density: return "density";
    case Dimension::Time: return "time";
  }
  return "?";
}

double parse_quantity(std::string_view text, Dimension dim) {
  const auto s = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr == s.data()) {
    throw ParseError("malformed quantity '" + std::string(text) + "'");
  }
  if (!std::isfinite(value)) throw ParseError("non-finite quantity '" + std::string(text) + "'");
  const auto suffix = trim(std::string_view(ptr, static_cast<size_t>(s.data() + s.size() - ptr)));
  if (suffix.empty()) return value;
  for (const auto& u : kUnits) {
    if (u.suffix == suffix) {
      if (u.dim != dim) {
        throw UnitError("unit '" + std::string(suffix) + "' is a " + std::string(to_string(u.dim)) +
                        ", expected " + std::string(to_string(dim)));
      }
      return value * u.factor;
    }
  }
  throw UnitError("unknown unit suffix '" + std::string(suffix) + "'");
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_quantity(double si_value, Dimension dim) {
  const auto suffix = si_suffix(dim);
  if (suffix.empty()) return format_double(si_value);
  return format_double(si_value) + " " + std::string(suffix);
}

}  // namespace cavitas
