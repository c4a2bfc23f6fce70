#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cavitas/least_squares.hpp"
#include "cavitas/spectral_model.hpp"

namespace cavitas {

/// Which SpectrumModelParams entries are free in a fit.
struct FreeMask {
  std::array<bool, SpectrumModelParams::kSize> free{};

  /// Omega_y, Gamma_m, g_y, kappa, the three amplitudes and the background.
  static FreeMask defaults();
  static FreeMask none() { return {}; }

  FreeMask& set(Param p, bool is_free) {
    free[static_cast<std::size_t>(p)] = is_free;
    return *this;
  }
  bool operator[](Param p) const { return free[static_cast<std::size_t>(p)]; }
  std::size_t count() const;
};

struct FitOptions {
  ModeMasses masses;
  double band_lo = 0.0;  // rad/s
  double band_hi = std::numeric_limits<double>::infinity();
  int multistart = 5;
  std::uint64_t multistart_seed = 0x5eed;
  double perturbation = 0.2;  // relative spread of multistart inits
  lsq::Options lm;
};

struct FitResult {
  SpectrumModelParams params;          // best fit; g_y reported as |g_y|
  SpectrumModelParams standard_error;  // 0 for frozen parameters
  double chi2_reduced = 0.0;
  double cost = 0.0;
  int n_iter = 0;
  bool converged = false;
  std::size_t n_bins = 0;
  FreeMask free;
  // free amplitudes/background (or |g_y|) that shrank to no measurable effect;
  // their standard error is reported as 0 and they are left out of the covariance
  std::array<bool, SpectrumModelParams::kSize> at_lower_bound{};
};

/// Weighted least squares on log-PSD residuals sqrt(n_avg) (log data - log model)
/// over the bins inside [band_lo, band_hi]. Gamma_m, kappa, amplitudes and the
/// background are fitted in log space; Gamma_m and kappa are floored at 1 mHz.
/// Throws InsufficientData (fewer than 10 bins per free parameter),
/// NonFiniteModel, DegenerateFit.
FitResult fit_psd(const PsdSeries& data, const SpectrumModelParams& init, const FreeMask& free,
                  const FitOptions& opts = {});

/// Gauss-Newton standard errors at result.params scaled by the reduced chi-square.
SpectrumModelParams fit_uncertainties(const FitResult& result, const PsdSeries& data,
                                      const FitOptions& opts = {});

/// Observed hybrid-branch frequencies versus a control coordinate (detuning or y0).
/// Missing observations are NaN.
struct BranchTrack {
  std::vector<double> coords;
  std::vector<double> omega_plus;
  std::vector<double> omega_minus;
  std::vector<double> confidence;  // weights; empty means all 1

  std::size_t size() const { return coords.size(); }
};

enum class BranchUse { Both, UpperOnly, LowerOnly };

struct CrossingEstimate {
  double g = 0.0;
  double omega_m = 0.0;
  double stderr_g = 0.0;
  double stderr_omega_m = 0.0;
  double chi2_reduced = 0.0;
  BranchUse used = BranchUse::Both;
};

struct AvoidedCrossingFit {
  CrossingEstimate best;                  // joint fit, or the single available branch
  bool joint = true;                      // false: input had only one branch (band edge)
  std::optional<CrossingEstimate> upper;  // fit of the Omega_+ branch alone
  std::optional<CrossingEstimate> lower;  // fit of the Omega_- branch alone
};

/// Fits Omega_pm(Delta) = Omega_m - (Omega_m + Delta)/2 +/- sqrt(g^2 + ((Omega_m + Delta)/2)^2)
/// to a detuning track. Throws InsufficientPoints below 4 grid points.
AvoidedCrossingFit fit_avoided_crossing(const BranchTrack& track);

struct SinusoidFit {
  double g_max = 0.0;     // rad/s, >= 0
  double y_offset = 0.0;  // m, in [0, lambda_c/2)
  double stderr_g = 0.0;
  double stderr_offset = 0.0;
  double band_lo = 0.0;   // g_max - 3 sigma
  double band_hi = 0.0;   // g_max + 3 sigma
  double chi2_reduced = 0.0;
};

/// Fits |g_max sin(2 pi (y0 - y_offset) / lambda_c)| with the period fixed.
/// Throws InsufficientPoints (fewer than 6 points or span < lambda_c/4) and
/// DegenerateFit when the data cannot identify g_max.
SinusoidFit fit_position_sinusoid(std::span<const double> y0, std::span<const double> g_abs,
                                  double lambda_c);

}  // namespace cavitas
