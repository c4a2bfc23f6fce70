#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "cavitas/config.hpp"
#include "cavitas/constants.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return CAVITAS_SOURCE_DIR; }

inline cavitas::ExperimentSpec baseline() {
  return cavitas::load_spec(source_dir() / "configs" / "paper-baseline.json");
}

inline double khz(double v) { return cavitas::kTwoPi * 1e3 * v; }

inline double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Per-test scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("cavitas-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace testing
