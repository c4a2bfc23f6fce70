#include "cavitas/coupling.hpp"

#include <cmath>
#include <numbers>

#include "cavitas/constants.hpp"
#include "cavitas/errors.hpp"

namespace cavitas::coupling {

using C = PhysConstants;

double polarizability(const ParticleSpec& particle) {
  const double n2 = particle.refractive_index * particle.refractive_index;
  const double r = particle.radius;
  return 4.0 * std::numbers::pi * C::eps0 * r * r * r * (n2 - 1.0) / (n2 + 2.0);
}

double trap_field(const TrapSpec& trap) {
  return std::sqrt(4.0 * trap.power /
                   (std::numbers::pi * C::eps0 * C::c * trap.waist_x * trap.waist_y));
}

CavityGeometry cavity_geometry(const CavitySpec& cavity) {
  CavityGeometry g;
  g.length = cavity.length();
  g.mode_volume = std::numbers::pi * cavity.waist * cavity.waist * g.length / 4.0;
  g.linewidth = cavity.linewidth();
  return g;
}

double zero_point_fluctuation(double mass, double omega) {
  return std::sqrt(C::hbar / (2.0 * mass * omega));
}

double coupling_G_perp(const ExperimentSpec& spec) {
  const double alpha = polarizability(spec.particle);
  const double e0 = trap_field(spec.trap);
  const double vc = cavity_geometry(spec.cavity).mode_volume;
  return alpha * e0 * std::sqrt(spec.cavity.resonance() / (2.0 * C::hbar * C::eps0 * vc));
}

double transverse_envelope(const ExperimentSpec& spec) {
  const auto& p = spec.position;
  const double w = spec.cavity.waist;
  return std::exp(-(p.dx * p.dx + p.dz * p.dz) / (w * w));
}

namespace {

void require_x_polarised(const ExperimentSpec& spec) {
  if (spec.trap.polarization_angle != 0.0) {
    throw UnsupportedPolarization(spec.trap.polarization_angle);
  }
}

}  // namespace

CsCoupling coupling_cs(const ExperimentSpec& spec) {
  require_x_polarised(spec);
  const double G = coupling_G_perp(spec);
  const double env = transverse_envelope(spec);
  const double phi = spec.position.phase(spec.cavity.wavelength);
  const double yzpf = zero_point_fluctuation(spec.particle.mass, spec.modes.omega_y);
  const double zzpf = zero_point_fluctuation(spec.particle.mass, spec.modes.omega_z);

  CsCoupling out;
  out.g_y = 0.5 * G * spec.cavity.wavenumber() * yzpf * std::sin(phi) * env;
  out.g_z_mag = std::abs(0.5 * G * spec.trap.wavenumber() * zzpf * std::cos(phi) * env);
  return out;
}

DriveCoupling coupling_drive(const ExperimentSpec& spec, double n_cav) {
  const double alpha = polarizability(spec.particle);
  const double vc = cavity_geometry(spec.cavity).mode_volume;
  const double phi = spec.position.phase(spec.cavity.wavelength);
  const double yzpf = zero_point_fluctuation(spec.particle.mass, spec.modes.omega_y);

  DriveCoupling out;
  out.single = alpha * spec.cavity.resonance() / (2.0 * C::eps0 * vc) * spec.cavity.wavenumber() *
               yzpf * std::sin(2.0 * phi);
  out.enhanced = out.single * std::sqrt(n_cav);
  return out;
}

double gas_damping(const ParticleSpec& particle, const EnvironmentSpec& env) {
  const double v_gas = std::sqrt(3.0 * C::kB * env.temperature / env.gas_molecular_mass);
  return 15.8 * particle.radius * particle.radius * env.pressure / (particle.mass * v_gas);
}

double thermal_occupation(double temperature, double omega) {
  return C::kB * temperature / (C::hbar * omega);
}

double cooperativity(double g_max, double kappa, double gamma_m, double n_th, double gamma_rec) {
  const double two_g = 2.0 * g_max;
  return two_g * two_g / (kappa * (gamma_m * (n_th + 1.0) + gamma_rec));
}

DerivedParams derive_all(const ExperimentSpec& spec) {
  require_x_polarised(spec);
  DerivedParams d;
  const auto geo = cavity_geometry(spec.cavity);
  d.alpha = polarizability(spec.particle);
  d.E0 = trap_field(spec.trap);
  d.Vc = geo.mode_volume;
  d.Lc = geo.length;
  d.kappa = geo.linewidth;
  d.G_perp = coupling_G_perp(spec);
  d.x_zpf = zero_point_fluctuation(spec.particle.mass, spec.modes.omega_x);
  d.y_zpf = zero_point_fluctuation(spec.particle.mass, spec.modes.omega_y);
  d.z_zpf = zero_point_fluctuation(spec.particle.mass, spec.modes.omega_z);
  d.phi = spec.position.phase(spec.cavity.wavelength);
  d.envelope = transverse_envelope(spec);

  const auto cs = coupling_cs(spec);
  d.g_y = cs.g_y;
  d.g_z_mag = cs.g_z_mag;
  d.g_y_max = 0.5 * d.G_perp * spec.cavity.wavenumber() * d.y_zpf;
  d.g_dr_single = coupling_drive(spec, 0.0).single;
  d.Gamma_m = gas_damping(spec.particle, spec.env);
  d.n_th = thermal_occupation(spec.env.temperature, spec.modes.omega_y);
  return d;
}

}  // namespace cavitas::coupling
