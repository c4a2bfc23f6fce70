#pragma once

#include <cstddef>
#include <vector>

#include "cavitas/spectral_model.hpp"

namespace cavitas {

struct Peak {
  double omega = 0.0;   // rad/s, refined by a local cubic on log-PSD
  double height = 0.0;  // smoothed PSD at the peak
  double width = 0.0;   // rad/s, full width at half height above background
};

struct PeakOptions {
  std::size_t smooth_bins = 5;   // odd moving-average length
  double family_error = 1e-3;    // chance of any false peak in a background-only spectrum
  double min_sigma = 3.0;        // floor on the threshold in units of estimator noise
};

/// Relative detection level (multiple of the median background) for a
/// spectrum of `n_bins` bins, each an average of `dof_averages` periodograms.
double detection_ratio(std::size_t n_bins, double dof_averages, const PeakOptions& opts);

/// Local maxima standing above the median background and above their
/// surrounding saddles by the noise-calibrated threshold, sorted by height.
std::vector<Peak> extract_peaks(const PsdSeries& data, std::size_t max_peaks,
                                const PeakOptions& opts = {});

}  // namespace cavitas
