#pragma once

#include "cavitas/config.hpp"

// Derived optomechanical quantities for the coherent-scattering geometry
// (trap axis z perpendicular to cavity axis y, trap polarised along x).
namespace cavitas::coupling {

/// Clausius-Mossotti polarizability of a dielectric sphere, C m^2/V.
double polarizability(const ParticleSpec& particle);

/// Peak trap field amplitude at the focus, V/m.
double trap_field(const TrapSpec& trap);

struct CavityGeometry {
  double length = 0.0;       // m
  double mode_volume = 0.0;  // m^3
  double linewidth = 0.0;    // kappa, rad/s
};

CavityGeometry cavity_geometry(const CavitySpec& cavity);

/// sqrt(hbar / (2 m Omega)).
double zero_point_fluctuation(double mass, double omega);

/// Cavity resonance shift for a particle at an antinode of the standing wave.
double coupling_G_perp(const ExperimentSpec& spec);

/// Gaussian amplitude profile of the cavity mode at the particle's transverse offset.
double transverse_envelope(const ExperimentSpec& spec);

/// g_z carries a -i prefactor: it couples the orthogonal cavity quadrature.
enum class Quadrature { Amplitude, Phase };

struct CsCoupling {
  double g_y = 0.0;      // rad/s, signed
  double g_z_mag = 0.0;  // rad/s
  Quadrature g_z_quadrature = Quadrature::Phase;
};

/// Throws UnsupportedPolarization unless the trap polarization angle is 0.
CsCoupling coupling_cs(const ExperimentSpec& spec);

struct DriveCoupling {
  double single = 0.0;    // rad/s, signed (sin 2phi)
  double enhanced = 0.0;  // single * sqrt(n_cav)
};

DriveCoupling coupling_drive(const ExperimentSpec& spec, double n_cav);

/// Residual-gas damping 15.8 r^2 p / (m v_gas), v_gas = sqrt(3 kB T / m_gas).
double gas_damping(const ParticleSpec& particle, const EnvironmentSpec& env);

/// High-temperature occupation kB T / (hbar Omega).
double thermal_occupation(double temperature, double omega);

/// (2 g)^2 / (kappa (Gamma_m (n_th + 1) + Gamma_rec)).
double cooperativity(double g_max, double kappa, double gamma_m, double n_th, double gamma_rec = 0.0);

struct DerivedParams {
  double alpha = 0.0;
  double E0 = 0.0;
  double Vc = 0.0;
  double Lc = 0.0;
  double G_perp = 0.0;
  double kappa = 0.0;
  double x_zpf = 0.0;
  double y_zpf = 0.0;
  double z_zpf = 0.0;
  double g_y = 0.0;
  double g_z_mag = 0.0;
  double g_y_max = 0.0;  // |g_y| at the intensity minimum on the cavity axis
  double g_dr_single = 0.0;
  double Gamma_m = 0.0;
  double n_th = 0.0;
  double phi = 0.0;
  double envelope = 0.0;

  bool operator==(const DerivedParams&) const = default;
};

DerivedParams derive_all(const ExperimentSpec& spec);

}  // namespace cavitas::coupling
