#include "cavitas/langevin.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "cavitas/constants.hpp"
#include "cavitas/coupling.hpp"
#include "cavitas/errors.hpp"

namespace cavitas {

namespace {

constexpr double kDivergenceBound = 1e8;

bool is_integer(double x) { return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x)); }

}  // namespace

double SimConfig::max_dt(double omega_m, double detuning, double kappa) {
  return 1.0 / (20.0 * std::max({omega_m, std::abs(detuning), kappa}));
}

SimConfig SimConfig::acquisition_defaults(double omega_m, double detuning, double kappa,
                                          std::uint64_t seed) {
  SimConfig sim;
  sim.seed = seed;
  const double sample_dt = 1.0 / sim.sample_rate;
  const double stride = std::ceil(sample_dt / max_dt(omega_m, detuning, kappa) - 1e-9);
  sim.dt = sample_dt / stride;
  sim.duration = sim.n_records * sim.record_length;
  return sim;
}

std::vector<std::string> SimConfig::violations(double omega_m, double detuning,
                                               double kappa) const {
  std::vector<std::string> out;
  if (!(dt > 0.0)) out.push_back("dt: must be > 0");
  if (dt > max_dt(omega_m, detuning, kappa) * (1.0 + 1e-12)) {
    out.push_back("dt: must be <= 1/(20 max(Omega_m, |Delta|, kappa))");
  }
  if (!(record_length > 0.0)) out.push_back("record_length: must be > 0");
  if (n_records < 1) out.push_back("n_records: must be >= 1");
  if (!(sample_rate > 0.0)) out.push_back("sample_rate: must be > 0");
  if (duration < n_records * record_length * (1.0 - 1e-12)) {
    out.push_back("duration: must be >= n_records * record_length");
  }
  if (!is_integer(sample_rate * record_length)) {
    out.push_back("record_length: sample_rate * record_length must be an integer");
  }
  if (dt > 0.0 && sample_rate > 0.0 && !is_integer(1.0 / (sample_rate * dt))) {
    out.push_back("dt: must divide the sample interval 1/sample_rate");
  }
  if (burn_in < 0.0) out.push_back("burn_in: must be >= 0");
  if (!(noise_scale >= 0.0)) out.push_back("noise_scale: must be >= 0");
  return out;
}

SimState drift(const SimState& s, const SpectrumModelParams& p) {
  const double half_kappa = 0.5 * p.kappa;
  return {
      -p.detuning * s.Y - half_kappa * s.X,
      p.detuning * s.X - half_kappa * s.Y + 2.0 * p.g_y * s.q,
      p.omega_y * s.v,
      -p.omega_y * s.q - p.gamma_m * s.v + 2.0 * p.g_y * s.X,
  };
}

Eigen::Matrix4d drift_matrix(const SpectrumModelParams& p) {
  Eigen::Matrix4d a;
  const double hk = 0.5 * p.kappa;
  const double g2 = 2.0 * p.g_y;
  // clang-format off
  a << -hk,         -p.detuning, 0.0,         0.0,
        p.detuning, -hk,         g2,          0.0,
        0.0,         0.0,        0.0,         p.omega_y,
        g2,          0.0,       -p.omega_y,  -p.gamma_m;
  // clang-format on
  return a;
}

Propagator make_propagator(const Eigen::Matrix4d& drift, const Eigen::Vector4d& diffusion,
                           double dt) {
  // Van Loan: exp([[-A, D], [0, A^T]] dt) = [[., F12], [0, F22]],
  // transition = F22^T, covariance = transition * F12.
  Eigen::Matrix<double, 8, 8> m = Eigen::Matrix<double, 8, 8>::Zero();
  m.topLeftCorner<4, 4>() = -drift * dt;
  m.topRightCorner<4, 4>() = diffusion.asDiagonal();
  m.topRightCorner<4, 4>() *= dt;
  m.bottomRightCorner<4, 4>() = drift.transpose() * dt;
  const Eigen::Matrix<double, 8, 8> e = m.exp();

  Propagator out;
  out.transition = e.bottomRightCorner<4, 4>().transpose();
  Eigen::Matrix4d cov = out.transition * e.topRightCorner<4, 4>();
  cov = 0.5 * (cov + cov.transpose()).eval();
  out.covariance = cov;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov);
  const Eigen::Vector4d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  out.noise_factor = es.eigenvectors() * root.asDiagonal();
  return out;
}

SimState evolve(const SimState& start, const SpectrumModelParams& p, double dt,
                std::size_t steps) {
  const auto prop = make_propagator(drift_matrix(p), Eigen::Vector4d::Zero(), dt);
  Eigen::Vector4d x(start.X, start.Y, start.q, start.v);
  for (std::size_t i = 0; i < steps; ++i) x = prop.transition * x;
  return {x[0], x[1], x[2], x[3]};
}

TimeSeries simulate(const SpectrumModelParams& p, double n_th, double zpf, const SimConfig& sim) {
  const auto bad = sim.violations(p.omega_y, p.detuning, p.kappa);
  if (!bad.empty()) {
    const auto colon = bad.front().find(':');
    throw ValidationError(bad.front().substr(0, colon), bad.front().substr(colon + 2));
  }

  const double s2 = sim.noise_scale * sim.noise_scale;
  Eigen::Vector4d diffusion = Eigen::Vector4d::Zero();
  diffusion[3] = 4.0 * p.gamma_m * n_th * s2;
  if (sim.include_cavity_input_noise) {
    diffusion[0] = p.kappa * s2;
    diffusion[1] = p.kappa * s2;
  }
  const auto prop = make_propagator(drift_matrix(p), diffusion, sim.dt);

  const auto stride = static_cast<std::size_t>(std::llround(1.0 / (sim.sample_rate * sim.dt)));
  const auto burn_steps = static_cast<std::size_t>(std::llround(sim.burn_in / sim.dt));
  const auto n_samples = static_cast<std::size_t>(std::llround(sim.duration * sim.sample_rate));

  std::mt19937_64 rng(sim.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Only columns with non-zero weight need random draws.
  std::vector<int> active;
  for (int c = 0; c < 4; ++c) {
    if (prop.noise_factor.col(c).cwiseAbs().maxCoeff() > 0.0) active.push_back(c);
  }

  Eigen::Vector4d x = Eigen::Vector4d::Zero();
  auto step = [&] {
    Eigen::Vector4d next = prop.transition * x;
    for (int c : active) next.noalias() += prop.noise_factor.col(c) * normal(rng);
    x = next;
    if (!(x.cwiseAbs().maxCoeff() <= kDivergenceBound)) {
      throw StabilityError("simulation diverged (|state| > 1e8); dt too large or blue-detuned "
                           "anti-damping");
    }
  };

  for (std::size_t i = 0; i < burn_steps; ++i) step();

  TimeSeries out;
  out.sample_rate = sim.sample_rate;
  out.q.resize(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    for (std::size_t i = 0; i < stride; ++i) step();
    out.q[k] = x[2] * zpf;
  }
  return out;
}

TimeSeries simulate(const ExperimentSpec& spec, const SimConfig& sim) {
  const auto d = coupling::derive_all(spec);
  const auto p = params_from_spec(spec);
  return simulate(p, d.n_th, d.y_zpf, sim);
}

std::vector<double> sampled_thermal_psd(const SpectrumModelParams& p, double mass,
                                        std::span<const double> omegas, double sample_rate) {
  SpectrumModelParams y = p;
  y.amp_x = 0.0;
  y.amp_z = 0.0;
  y.background = 0.0;
  const auto masses = ModeMasses::uniform(mass);
  const double ws = hz_to_rad(sample_rate);
  constexpr int kImages = 64;
  std::vector<double> out(omegas.size(), 0.0);
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    double s = 0.0;
    for (int k = -kImages; k <= kImages; ++k) {
      const double w = std::abs(omegas[i] + k * ws);
      if (w > 0.0) s += psd_model(w, y, masses);
    }
    out[i] = s;
  }
  return out;
}

OracleReport oracle_compare(const ExperimentSpec& spec, const SimConfig& sim, std::size_t rebin) {
  const auto series = simulate(spec, sim);
  OracleReport rep;
  rep.rebin = std::max<std::size_t>(1, rebin);
  rep.simulated = welch_psd(series.q, sim.record_length, sim.sample_rate, Window::Hann);

  const auto p = params_from_spec(spec);
  rep.analytic = sampled_thermal_psd(p, spec.particle.mass, rep.simulated.freqs, sim.sample_rate);
  rep.band_lo = 0.5 * p.omega_y;
  rep.band_hi = 2.0 * p.omega_y;

  std::vector<double> sim_bins, model_bins;
  double sim_acc = 0.0, model_acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < rep.simulated.size(); ++i) {
    const double w = rep.simulated.freqs[i];
    if (w < rep.band_lo || w > rep.band_hi) continue;
    sim_acc += rep.simulated.values[i];
    model_acc += rep.analytic[i];
    if (++count == rep.rebin) {
      sim_bins.push_back(sim_acc / double(count));
      model_bins.push_back(model_acc / double(count));
      sim_acc = model_acc = 0.0;
      count = 0;
    }
  }
  if (sim_bins.empty()) throw InsufficientData("no PSD bins in comparison band");

  double ratio_sum = 0.0;
  for (std::size_t i = 0; i < sim_bins.size(); ++i) ratio_sum += sim_bins[i] / model_bins[i];
  rep.scale_factor = ratio_sum / double(sim_bins.size());

  double sq = 0.0;
  for (std::size_t i = 0; i < sim_bins.size(); ++i) {
    const double rel = sim_bins[i] / (rep.scale_factor * model_bins[i]) - 1.0;
    sq += rel * rel;
  }
  rep.rms_relative_error = std::sqrt(sq / double(sim_bins.size()));
  return rep;
}

}  // namespace cavitas
