#include "cavitas/spectral_model.hpp"

#include <cmath>
#include <random>

#include "cavitas/constants.hpp"
#include "cavitas/coupling.hpp"
#include "cavitas/errors.hpp"
#include "cavitas/parallel.hpp"

namespace cavitas {

const std::array<std::string_view, SpectrumModelParams::kSize>& SpectrumModelParams::names() {
  static const std::array<std::string_view, kSize> n = {
      "omega_x", "omega_y", "omega_z", "gamma_m", "g_y",       "kappa",
      "detuning", "amp_x",  "amp_y",   "amp_z",   "background"};
  return n;
}

std::array<double, SpectrumModelParams::kSize> SpectrumModelParams::to_array() const {
  return {omega_x, omega_y, omega_z, gamma_m, g_y, kappa, detuning, amp_x, amp_y, amp_z, background};
}

SpectrumModelParams SpectrumModelParams::from_array(const std::array<double, kSize>& a) {
  return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8], a[9], a[10]};
}

HybridModes hybrid_frequencies(double omega_m, double detuning, double g) {
  const double half = 0.5 * (omega_m + detuning);
  const double root = std::sqrt(g * g + half * half);
  HybridModes h;
  h.omega_plus = omega_m - half + root;
  h.omega_minus = omega_m - half - root;
  h.splitting = 2.0 * root;
  return h;
}

namespace {

// g^2 (Omega_m/Omega) [a(D+W) +/- a(D-W)] share their Lorentzian denominators.
struct CavityResponse {
  double shift;    // delta Omega_m
  double damping;  // Gamma_opt
};

CavityResponse cavity_response(double omega, double omega_m, double g, double kappa,
                               double detuning) {
  if (g == 0.0) return {0.0, 0.0};
  const double k2 = 0.25 * kappa * kappa;
  const double sp = detuning + omega;
  const double sm = detuning - omega;
  const double dp = sp * sp + k2;
  const double dm = sm * sm + k2;
  const double pre = g * g * omega_m / omega;
  return {pre * (sp / dp + sm / dm), pre * (kappa / dp - kappa / dm)};
}

}  // namespace

double optical_damping(double omega, const SpectrumModelParams& p) {
  return cavity_response(omega, p.omega_y, p.g_y, p.kappa, p.detuning).damping;
}

double spring_shift(double omega, const SpectrumModelParams& p) {
  return cavity_response(omega, p.omega_y, p.g_y, p.kappa, p.detuning).shift;
}

double coupled_susceptibility_sq(double omega, double omega_m, double gamma_m, double g,
                                 double kappa, double detuning, double mass) {
  const auto r = cavity_response(omega, omega_m, g, kappa, detuning);
  const double re = omega_m * omega_m + 2.0 * omega * r.shift - omega * omega;
  const double im = omega * (gamma_m + r.damping);
  return 1.0 / (mass * mass * (re * re + im * im));
}

double susceptibility_sq(double omega, const SpectrumModelParams& p, double mass) {
  return coupled_susceptibility_sq(omega, p.omega_y, p.gamma_m, p.g_y, p.kappa, p.detuning, mass);
}

double psd_model(double omega, const SpectrumModelParams& p, const ModeMasses& masses) {
  double s = p.background;
  if (p.amp_x != 0.0) {
    s += p.amp_x * coupled_susceptibility_sq(omega, p.omega_x, p.gamma_m, 0.0, p.kappa, p.detuning,
                                             masses.x);
  }
  if (p.amp_y != 0.0) s += p.amp_y * susceptibility_sq(omega, p, masses.y);
  if (p.amp_z != 0.0) {
    s += p.amp_z * coupled_susceptibility_sq(omega, p.omega_z, p.gamma_m, 0.0, p.kappa, p.detuning,
                                             masses.z);
  }
  return s;
}

void PsdSeries::check() const {
  if (freqs.size() != values.size()) throw InsufficientData("PSD frequency/value length mismatch");
  if (n_avg < 1) throw InsufficientData("PSD averaging count must be >= 1");
  for (std::size_t i = 1; i < freqs.size(); ++i) {
    if (!(freqs[i] > freqs[i - 1])) throw InsufficientData("PSD frequencies not strictly increasing");
  }
  for (double v : values) {
    if (!(v >= 0.0)) throw InsufficientData("PSD values must be non-negative");
  }
}

std::vector<double> frequency_grid(double f_min_hz, double f_max_hz, double step_hz) {
  std::vector<double> out;
  if (!(step_hz > 0.0) || f_max_hz < f_min_hz) return out;
  const auto n = static_cast<std::size_t>(std::floor((f_max_hz - f_min_hz) / step_hz + 1e-9)) + 1;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(hz_to_rad(f_min_hz + step_hz * double(i)));
  return out;
}

std::vector<double> default_frequency_grid() { return frequency_grid(25.0, 500e3, 25.0); }

std::vector<double> evaluate_psd(std::span<const double> omegas, const SpectrumModelParams& p,
                                 const ModeMasses& masses) {
  std::vector<double> out(omegas.size());
  for (std::size_t i = 0; i < omegas.size(); ++i) out[i] = psd_model(omegas[i], p, masses);
  return out;
}

PsdSeries synthesize_spectrum(const SpectrumModelParams& p, std::span<const double> grid,
                              int n_avg, std::uint64_t seed, const ModeMasses& masses) {
  if (n_avg < 1) throw InsufficientData("n_avg must be >= 1");
  PsdSeries out;
  out.freqs.assign(grid.begin(), grid.end());
  out.values = evaluate_psd(grid, p, masses);
  out.n_avg = n_avg;
  out.meta["source"] = "synthetic";
  out.meta["seed"] = std::to_string(seed);

  std::mt19937_64 rng(seed);
  // chi^2_{2n} / (2n) == Gamma(shape n, scale 1/n)
  std::gamma_distribution<double> gamma(double(n_avg), 1.0 / double(n_avg));
  for (double& v : out.values) v *= gamma(rng);
  return out;
}

double thermal_amplitude(double mass, double gamma_m, double temperature) {
  return 4.0 * mass * gamma_m * PhysConstants::kB * temperature;
}

SpectrumModelParams params_from_spec(const ExperimentSpec& spec, const MapOptions& opts) {
  const auto d = coupling::derive_all(spec);
  SpectrumModelParams p;
  p.omega_x = spec.modes.omega_x;
  p.omega_y = spec.modes.omega_y + opts.omega_offset;
  p.omega_z = spec.modes.omega_z;
  p.gamma_m = d.Gamma_m;
  p.g_y = d.g_y;
  p.kappa = d.kappa;
  p.detuning = spec.detuning;
  p.amp_y = thermal_amplitude(spec.particle.mass, d.Gamma_m, spec.env.temperature);
  p.amp_x = opts.rel_amp_x * p.amp_y;
  p.amp_z = opts.rel_amp_z * p.amp_y;
  p.background = opts.background;
  return p;
}

namespace {

SpectrumMap sweep(const std::vector<ExperimentSpec>& rows_spec, std::span<const double> coords,
                  std::span<const double> freqs, const MapOptions& opts, std::string name) {
  SpectrumMap map;
  map.coord_name = std::move(name);
  map.coords.assign(coords.begin(), coords.end());
  map.freqs.assign(freqs.begin(), freqs.end());
  map.rows.resize(coords.size());
  const auto masses = ModeMasses::uniform(rows_spec.empty() ? 1.0 : rows_spec[0].particle.mass);
  parallel_for(coords.size(), opts.threads, [&](std::size_t i) {
    map.rows[i] = evaluate_psd(freqs, params_from_spec(rows_spec[i], opts), masses);
  });
  return map;
}

}  // namespace

SpectrumMap sweep_detuning(const ExperimentSpec& spec, std::span<const double> detunings,
                           std::span<const double> freqs, const MapOptions& opts) {
  std::vector<ExperimentSpec> rows(detunings.size(), spec);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].detuning = detunings[i];
  return sweep(rows, detunings, freqs, opts, "delta_rad_s");
}

SpectrumMap sweep_position(const ExperimentSpec& spec, std::span<const double> y0s,
                           std::span<const double> freqs, const MapOptions& opts) {
  std::vector<ExperimentSpec> rows(y0s.size(), spec);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].position.y0 = y0s[i];
  return sweep(rows, y0s, freqs, opts, "y0_m");
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = a;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = a + (b - a) * double(i) / double(n - 1);
  return out;
}

}  // namespace cavitas
