#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cavitas {

inline constexpr double kSilicaDensity = 1850.0;        // kg/m^3
inline constexpr double kAirMolecularMass = 4.81e-26;   // kg, mean air molecule

struct ParticleSpec {
  double radius = 0.0;            // m
  double mass = 0.0;              // kg
  double refractive_index = 0.0;

  static double mass_from_density(double radius, double density);

  bool operator==(const ParticleSpec&) const = default;
};

struct TrapSpec {
  double wavelength = 0.0;          // m
  double power = 0.0;               // W
  double waist_x = 0.0;             // m
  double waist_y = 0.0;             // m
  double polarization_angle = 0.0;  // rad
  double numerical_aperture = 0.0;  // informational only

  double wavenumber() const;

  bool operator==(const TrapSpec&) const = default;
};

struct CavitySpec {
  double wavelength = 0.0;  // m
  double finesse = 0.0;
  double fsr = 0.0;         // rad/s
  double waist = 0.0;       // m

  double length() const;     // pi c / fsr
  double linewidth() const;  // fsr / finesse
  double wavenumber() const;
  double resonance() const;  // 2 pi c / wavelength

  bool operator==(const CavitySpec&) const = default;
};

struct EnvironmentSpec {
  double pressure = 0.0;                            // Pa
  double temperature = 0.0;                         // K
  double gas_molecular_mass = kAirMolecularMass;    // kg
  double recoil_rate = 0.0;                         // rad/s

  bool operator==(const EnvironmentSpec&) const = default;
};

/// y0 along the cavity axis (y0 = lambda_c/4 is the intensity minimum);
/// dz, dx are offsets from the cavity waist centre.
struct ParticlePosition {
  double y0 = 0.0;
  double dz = 0.0;
  double dx = 0.0;

  double phase(double cavity_wavelength) const;

  bool operator==(const ParticlePosition&) const = default;
};

struct MechanicalModes {
  double omega_x = 0.0;  // rad/s
  double omega_y = 0.0;
  double omega_z = 0.0;

  bool operator==(const MechanicalModes&) const = default;
};

struct ExperimentSpec {
  ParticleSpec particle;
  TrapSpec trap;
  CavitySpec cavity;
  EnvironmentSpec env;
  ParticlePosition position;
  MechanicalModes modes;
  double detuning = 0.0;  // rad/s, omega_t - omega_c

  bool operator==(const ExperimentSpec&) const = default;
};


struct Violation {
  std::string field;
  std::string rule;

  std::string str() const { return field + ": " + rule; }
};

std::vector<Violation> validate(const ExperimentSpec& spec);

/// Throws ValidationError for the first violation, if any.
void require_valid(const ExperimentSpec& spec);

inline constexpr int kSchemaVersion = 1;

ExperimentSpec parse_spec(const nlohmann::json& doc);
ExperimentSpec load_spec(const std::filesystem::path& path);

/// SI values with base-unit suffixes; parse_spec(to_json(s)) == s bit for bit.
nlohmann::json to_json(const ExperimentSpec& spec);
std::string serialize(const ExperimentSpec& spec);

/// Path from CAVITAS_CONFIG, if set and non-empty.
std::optional<std::filesystem::path> default_config_path();

}  // namespace cavitas
