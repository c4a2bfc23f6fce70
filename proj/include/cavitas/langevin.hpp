#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cavitas/config.hpp"
#include "cavitas/spectral_model.hpp"

namespace cavitas {

struct SimConfig {
  double dt = 4e-8;              // s, integration step
  double duration = 1.0;         // s, recorded span (after burn-in)
  double record_length = 0.04;   // s
  int n_records = 25;
  double sample_rate = 1e6;      // Hz
  double burn_in = 0.02;         // s, discarded before recording starts
  std::uint64_t seed = 1;
  bool include_cavity_input_noise = false;
  double noise_scale = 1.0;      // multiplies every noise amplitude

  /// Largest dt allowed for the given rates: 1 / (20 max(Omega_m, |Delta|, kappa)).
  static double max_dt(double omega_m, double detuning, double kappa);

  /// Standard acquisition (25 x 40 ms at 1 MHz) with the largest dt that both
  /// satisfies max_dt and divides the sample interval.
  static SimConfig acquisition_defaults(double omega_m, double detuning, double kappa,
                                        std::uint64_t seed = 1);

  /// Human-readable invariant violations; empty when valid.
  std::vector<std::string> violations(double omega_m, double detuning, double kappa) const;
};

/// Cavity quadratures X = a + a^dag, Y = -i(a - a^dag); q = y / y_zpf and its
/// conjugate v, both dimensionless.
struct SimState {
  double X = 0.0;
  double Y = 0.0;
  double q = 0.0;
  double v = 0.0;

  bool operator==(const SimState&) const = default;
};

/// Linearised coherent-scattering equations of motion (rotating frame of the
/// trap laser, Delta = omega_t - omega_c):
///   X' = -Delta Y - kappa/2 X
///   Y' =  Delta X - kappa/2 Y + 2 g q
///   q' =  Omega_m v
///   v' = -Omega_m q - Gamma_m v + 2 g X
/// Red detuning (Delta < 0) damps the mechanics.
SimState drift(const SimState& s, const SpectrumModelParams& p);

Eigen::Matrix4d drift_matrix(const SpectrumModelParams& p);

/// Exact one-step propagator of the linear SDE dx = A x dt + B dW:
/// x_{n+1} = transition * x_n + noise_factor * xi, xi ~ N(0, I).
struct Propagator {
  Eigen::Matrix4d transition;
  Eigen::Matrix4d noise_factor;
  Eigen::Matrix4d covariance;
};

/// diffusion holds the per-unit-time noise variances on (X, Y, q, v).
Propagator make_propagator(const Eigen::Matrix4d& drift, const Eigen::Vector4d& diffusion,
                           double dt);

struct TimeSeries {
  double sample_rate = 0.0;  // Hz
  std::vector<double> q;     // m

  double time(std::size_t i) const { return double(i) / sample_rate; }
};

/// Thermal momentum noise 4 Gamma_m n_th per unit time (so <q^2> = 2 n_th),
/// optional unit-variance cavity input noise. Throws StabilityError when any
/// coordinate exceeds 1e8, ValidationError on a bad SimConfig.
TimeSeries simulate(const SpectrumModelParams& p, double n_th, double zpf, const SimConfig& sim);
TimeSeries simulate(const ExperimentSpec& spec, const SimConfig& sim);

/// Deterministic free evolution (no noise) of `steps` steps; returns the final state.
SimState evolve(const SimState& start, const SpectrumModelParams& p, double dt, std::size_t steps);

enum class Window { Rectangular, Hann };

/// Non-overlapping records, mean removed, windowed periodograms averaged into a
/// one-sided PSD (per Hz) whose integral equals the window-weighted variance.
PsdSeries welch_psd(std::span<const double> series, double record_length, double sample_rate,
                    Window window = Window::Hann);

struct OracleReport {
  double rms_relative_error = 0.0;
  double band_lo = 0.0;  // rad/s
  double band_hi = 0.0;
  double scale_factor = 0.0;  // simulated / absolute analytic PSD
  std::size_t rebin = 1;
  PsdSeries simulated;
  std::vector<double> analytic;  // absolute model on simulated.freqs (aliasing folded in)
};

/// Simulates, estimates the PSD and compares to the analytic model over
/// [Omega_m/2, 2 Omega_m] after averaging `rebin` adjacent bins of both.
OracleReport oracle_compare(const ExperimentSpec& spec, const SimConfig& sim,
                            std::size_t rebin = 16);

/// Absolute analytic PSD of the sampled y displacement, including the
/// spectral images folded back by sampling at `sample_rate`.
std::vector<double> sampled_thermal_psd(const SpectrumModelParams& p, double mass,
                                        std::span<const double> omegas, double sample_rate);

}  // namespace cavitas
