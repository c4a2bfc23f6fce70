#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cavitas/config.hpp"

namespace cavitas {

/// Parameter vector of the three-mode displacement PSD model. The y mode is
/// coupled to the cavity with strength g_y; x and z are bare oscillators.
struct SpectrumModelParams {
  double omega_x = 0.0;  // rad/s
  double omega_y = 0.0;
  double omega_z = 0.0;
  double gamma_m = 0.0;
  double g_y = 0.0;
  double kappa = 0.0;
  double detuning = 0.0;
  double amp_x = 0.0;  // free scale factors multiplying |chi|^2
  double amp_y = 0.0;
  double amp_z = 0.0;
  double background = 0.0;  // m^2/Hz

  static constexpr std::size_t kSize = 11;
  static const std::array<std::string_view, kSize>& names();

  std::array<double, kSize> to_array() const;
  static SpectrumModelParams from_array(const std::array<double, kSize>& a);

  bool operator==(const SpectrumModelParams&) const = default;
};

/// Index order of SpectrumModelParams::to_array().
enum class Param : std::size_t {
  OmegaX, OmegaY, OmegaZ, GammaM, GY, Kappa, Detuning, AmpX, AmpY, AmpZ, Background
};

struct ModeMasses {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  static ModeMasses uniform(double m) { return {m, m, m}; }
};

struct HybridModes {
  double omega_plus = 0.0;
  double omega_minus = 0.0;
  double splitting = 0.0;
};

HybridModes hybrid_frequencies(double omega_m, double detuning, double g);

double optical_damping(double omega, const SpectrumModelParams& p);
double spring_shift(double omega, const SpectrumModelParams& p);

/// |chi(Omega)|^2 of the y mode including optical damping and spring shift.
double susceptibility_sq(double omega, const SpectrumModelParams& p, double mass);

/// |chi|^2 of a single oscillator coupled with strength g to a cavity of
/// linewidth kappa at detuning Delta (g = 0 gives the bare oscillator).
double coupled_susceptibility_sq(double omega, double omega_m, double gamma_m, double g,
                                 double kappa, double detuning, double mass);

double psd_model(double omega, const SpectrumModelParams& p, const ModeMasses& masses);

/// Frequency grid + one-sided PSD (per Hz) + number of averaged periodograms.
struct PsdSeries {
  std::vector<double> freqs;   // rad/s, strictly increasing
  std::vector<double> values;  // m^2/Hz
  int n_avg = 1;
  std::map<std::string, std::string> meta;

  /// Throws InsufficientData/ValidationError style errors on broken invariants.
  void check() const;
  std::size_t size() const { return freqs.size(); }
};

/// Uniform grid f_min, f_min + step, ... <= f_max (Hz in, rad/s out).
std::vector<double> frequency_grid(double f_min_hz, double f_max_hz, double step_hz);
std::vector<double> default_frequency_grid();  // 25 Hz .. 500 kHz, 25 Hz resolution

std::vector<double> evaluate_psd(std::span<const double> omegas, const SpectrumModelParams& p,
                                 const ModeMasses& masses);

/// Each bin ~ model * chi^2_{2 n_avg} / (2 n_avg): the distribution of an
/// n_avg-averaged periodogram of Gaussian data. Deterministic in `seed`.
PsdSeries synthesize_spectrum(const SpectrumModelParams& p, std::span<const double> grid,
                              int n_avg, std::uint64_t seed, const ModeMasses& masses);

/// One-sided thermal force PSD 4 m Gamma kB T: amplitude giving the absolute
/// displacement PSD when multiplied by |chi|^2.
double thermal_amplitude(double mass, double gamma_m, double temperature);

/// How a physical configuration maps onto model parameters for maps.
struct MapOptions {
  double rel_amp_x = 0.0;     // x-mode amplitude relative to the thermal y amplitude
  double rel_amp_z = 0.0;
  double background = 0.0;    // m^2/Hz
  double omega_offset = 0.0;  // rad/s added to omega_y (intracavity-field shift)
  unsigned threads = 1;
};

/// Model parameters with absolute thermal amplitudes derived from `spec`.
SpectrumModelParams params_from_spec(const ExperimentSpec& spec, const MapOptions& opts = {});

struct SpectrumMap {
  std::string coord_name;            // "delta_rad_s" or "y0_m"
  std::vector<double> coords;        // SI
  std::vector<double> freqs;         // rad/s
  std::vector<std::vector<double>> rows;
};

SpectrumMap sweep_detuning(const ExperimentSpec& spec, std::span<const double> detunings,
                           std::span<const double> freqs, const MapOptions& opts = {});
SpectrumMap sweep_position(const ExperimentSpec& spec, std::span<const double> y0s,
                           std::span<const double> freqs, const MapOptions& opts = {});

std::vector<double> linspace(double a, double b, std::size_t n);

}  // namespace cavitas
