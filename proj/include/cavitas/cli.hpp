#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cavitas/config.hpp"

namespace cavitas::cli {

enum class Subcommand {
  Params,
  Spectrum,
  SweepDetuning,
  SweepPosition,
  Simulate,
  Fit,
  CrossingFit,
  PositionFit,
  Cooperativity,
};

std::string_view to_string(Subcommand sub);

/// Subcommand-specific knobs; unset fields fall back to documented defaults.
struct CommandOptions {
  // frequency grid, Hz
  double f_min = 25.0;
  double f_max = 500e3;
  double f_step = 25.0;
  // sweep-detuning, in units of -omega_y (negative = red)
  double delta_min = -1.5;
  double delta_max = -0.7;
  std::size_t steps = 80;
  // sweep-position; SI (unit suffixes accepted on the command line)
  std::optional<double> y0_min;
  std::optional<double> y0_max;
  // spectrum: 0 = noiseless model, otherwise synthetic with this many averages
  int n_avg = 0;
  double rel_amp_x = 0.0;
  double rel_amp_z = 0.0;
  double background = 0.0;  // m^2/Hz
  // simulate
  std::optional<std::filesystem::path> series_path;
  bool cavity_noise = false;
  // fit, crossing-fit, position-fit
  std::optional<std::filesystem::path> input_path;
  std::optional<double> band_min;  // Hz
  std::optional<double> band_max;
  // cooperativity
  double n_cav = 1.6e8;
};

struct CommandSpec {
  Subcommand subcommand = Subcommand::Params;
  std::optional<std::filesystem::path> config_path;  // falls back to CAVITAS_CONFIG
  std::optional<std::filesystem::path> output_path;
  std::vector<std::string> overrides;  // "key=value"
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
  CommandOptions options;
};

/// Applies "key=value" overrides to a copy of `spec`. Keys are dotted paths
/// ("environment.pressure") or unique leaf names ("pressure"); values use the
/// same units as config files. Throws UnknownKey, UnitError, ParseError.
ExperimentSpec apply_overrides(const ExperimentSpec& spec, const std::vector<std::string>& overrides);

/// Exit codes: 0 ok, 2 validation/input error, 3 fit did not converge,
/// 4 simulation unstable. Diagnostics go to `err`, the summary line to `out`.
int run(const CommandSpec& cmd, std::ostream& out, std::ostream& err);

/// Parses argv and calls run().
int main_entry(int argc, char** argv);

}  // namespace cavitas::cli
