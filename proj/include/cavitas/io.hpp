#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "cavitas/coupling.hpp"
#include "cavitas/fit.hpp"
#include "cavitas/langevin.hpp"
#include "cavitas/spectral_model.hpp"

namespace cavitas::io {

/// Writes to a sibling temporary file and renames it over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// PsdSeries CSV: "# key=value" meta lines (n_avg first), header
// "freq_hz,psd_m2_per_hz", one row per bin.
std::string psd_to_csv(const PsdSeries& psd);
PsdSeries psd_from_csv(const std::string& text);

// Time series CSV: header "t_s,q_m".
std::string series_to_csv(const TimeSeries& series);

// Map CSV: header "<coord_name>,<f_0 Hz>,<f_1 Hz>,...", then one row per coordinate.
std::string map_to_csv(const SpectrumMap& map);

// BranchTrack CSV: "coord,omega_plus_rad_s,omega_minus_rad_s,confidence"; empty cell = missing.
std::string track_to_csv(const BranchTrack& track);
BranchTrack track_from_csv(const std::string& text);

// Position track CSV: "y0_m,g_abs_rad_s".
std::pair<std::vector<double>, std::vector<double>> position_track_from_csv(const std::string& text);

nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const coupling::DerivedParams& d);
nlohmann::json to_json(const AvoidedCrossingFit& fit);
nlohmann::json to_json(const SinusoidFit& fit);

}  // namespace cavitas::io
