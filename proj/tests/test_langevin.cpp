#include <doctest.h>

#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "cavitas/coupling.hpp"
#include "cavitas/errors.hpp"
#include "cavitas/fit.hpp"
#include "cavitas/langevin.hpp"
#include "support.hpp"

using namespace cavitas;
using testing::khz;
using testing::rel;

namespace {

SpectrumModelParams osc(double g = 0.0, double detuning = 0.0) {
  SpectrumModelParams p;
  p.omega_y = khz(197);
  p.gamma_m = khz(0.85);
  p.kappa = khz(10);
  p.g_y = g;
  p.detuning = detuning;
  return p;
}

SimConfig short_run(const SpectrumModelParams& p, std::uint64_t seed = 1, int records = 4) {
  auto sim = SimConfig::acquisition_defaults(p.omega_y, p.detuning, p.kappa, seed);
  sim.n_records = records;
  sim.duration = records * sim.record_length;
  sim.burn_in = 0.005;
  return sim;
}

}  // namespace

TEST_CASE("drift matches the matrix form") {
  const auto p = osc(khz(23), -khz(197));
  const SimState s{0.3, -1.1, 2.0, 0.7};
  const auto d = drift(s, p);
  const Eigen::Vector4d v = drift_matrix(p) * Eigen::Vector4d(s.X, s.Y, s.q, s.v);
  CHECK(d.X == doctest::Approx(v[0]));
  CHECK(d.Y == doctest::Approx(v[1]));
  CHECK(d.q == doctest::Approx(v[2]));
  CHECK(d.v == doctest::Approx(v[3]));
  CHECK(drift(SimState{}, p) == SimState{});
}

TEST_CASE("free evolution") {
  SUBCASE("damped oscillator envelope") {
    const auto p = osc();
    const double dt = 1e-7;
    const std::size_t steps = 20000;  // 2 ms, ~ 10 damping times / 2
    const auto s = evolve({0, 0, 1, 0}, p, dt, steps);
    const double t = dt * double(steps);
    // energy q^2 + v^2 decays as exp(-Gamma t) up to a ripple of order Gamma / Omega
    CHECK((s.q * s.q + s.v * s.v) == doctest::Approx(std::exp(-p.gamma_m * t)).epsilon(0.01));
    CHECK(s.X == 0.0);
    CHECK(s.Y == 0.0);
  }
  SUBCASE("cavity decays at kappa/2 and rotates at Delta") {
    const auto p = osc(0.0, -khz(197));
    const double dt = 1e-7;
    const std::size_t steps = 1234;
    const double t = dt * double(steps);
    const auto s = evolve({1, 0, 0, 0}, p, dt, steps);
    const double env = std::exp(-p.kappa * t / 2);
    CHECK(s.X == doctest::Approx(env * std::cos(p.detuning * t)).epsilon(1e-9));
    CHECK(s.Y == doctest::Approx(env * std::sin(p.detuning * t)).epsilon(1e-9));
    CHECK(s.q == 0.0);
  }
  SUBCASE("fixed point is preserved") {
    CHECK(evolve({}, osc(khz(23), -khz(197)), 1e-7, 1000) == SimState{});
  }
  SUBCASE("energy conserved without damping") {
    auto p = osc();
    p.gamma_m = 0;
    const double dt = 1 / (200 * p.omega_y);
    const auto s = evolve({0, 0, 1, 0}, p, dt, 1000000);
    CHECK(std::abs(s.q * s.q + s.v * s.v - 1.0) < 1e-6);
  }
}

TEST_CASE("red detuning damps, blue detuning can run away") {
  auto eig = [](const SpectrumModelParams& p) {
    Eigen::EigenSolver<Eigen::Matrix4d> es(drift_matrix(p));
    return es.eigenvalues().real().maxCoeff();
  };
  CHECK(eig(osc(khz(23), -khz(197))) < 0);
  CHECK(eig(osc(khz(23), khz(197))) > 0);

  const auto blue = osc(khz(23), khz(197));
  auto sim = short_run(blue);
  CHECK_THROWS_AS(simulate(blue, 3e7, 2.6e-12, sim), StabilityError);
}

TEST_CASE("sim config invariants") {
  const auto p = osc(khz(23), -khz(197));
  auto sim = SimConfig::acquisition_defaults(p.omega_y, p.detuning, p.kappa);
  CHECK(sim.violations(p.omega_y, p.detuning, p.kappa).empty());
  CHECK(sim.dt <= SimConfig::max_dt(p.omega_y, p.detuning, p.kappa));
  CHECK(sim.record_length == 0.04);
  CHECK(sim.n_records == 25);
  CHECK(sim.sample_rate == 1e6);

  auto bad = sim;
  bad.dt = 1e-6;
  CHECK_FALSE(bad.violations(p.omega_y, p.detuning, p.kappa).empty());
  CHECK_THROWS_AS(simulate(p, 1e7, 1e-12, bad), ValidationError);
  bad = sim;
  bad.record_length = 0.0400005;
  CHECK_FALSE(bad.violations(p.omega_y, p.detuning, p.kappa).empty());
  bad = sim;
  bad.duration = 0.5;
  CHECK_FALSE(bad.violations(p.omega_y, p.detuning, p.kappa).empty());
}

TEST_CASE("exact propagator covariance") {
  // stationary covariance of the free oscillator: <q^2> = <v^2> = D / (2 Gamma)
  const auto p = osc();
  const double D = 4 * p.gamma_m * 1e6;
  const auto prop = make_propagator(drift_matrix(p), Eigen::Vector4d(0, 0, 0, D), 1e-6);
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 200000; ++i) cov = prop.transition * cov * prop.transition.transpose() + prop.covariance;
  CHECK(cov(2, 2) == doctest::Approx(2e6).epsilon(1e-3));
  CHECK(cov(3, 3) == doctest::Approx(2e6).epsilon(1e-3));
  const Eigen::Matrix4d rebuilt = prop.noise_factor * prop.noise_factor.transpose();
  CHECK((rebuilt - prop.covariance).norm() <= 1e-10 * prop.covariance.norm());
}

TEST_CASE("simulation determinism, equipartition and linearity") {
  const auto p = osc();
  const double n_th = 3.15e7, zpf = 2.58e-12;
  const auto sim = short_run(p, 5);
  const auto a = simulate(p, n_th, zpf, sim);
  const auto b = simulate(p, n_th, zpf, sim);
  CHECK(a.q == b.q);
  CHECK(a.q.size() == 160000);
  CHECK(a.sample_rate == 1e6);
  auto other = sim;
  other.seed = 6;
  CHECK(simulate(p, n_th, zpf, other).q != a.q);

  // <q^2> = 2 n_th zpf^2 (in meters: kB T / (m Omega^2))
  const double var = std::inner_product(a.q.begin(), a.q.end(), a.q.begin(), 0.0) / double(a.q.size());
  CHECK(var == doctest::Approx(2 * n_th * zpf * zpf).epsilon(0.15));

  auto loud = sim;
  loud.noise_scale = 2.0;
  const auto c = simulate(p, n_th, zpf, loud);
  const auto pa = welch_psd(a.q, 0.04, 1e6);
  const auto pc = welch_psd(c.q, 0.04, 1e6);
  for (std::size_t k = 1; k < pa.size(); k += 997) {
    CHECK(pc.values[k] / pa.values[k] == doctest::Approx(4.0).epsilon(0.05));
  }
}

TEST_CASE("welch PSD normalisation") {
  const double fs = 1e6, T = 0.04;
  const std::size_t n = 40000;

  SUBCASE("resolution is 1/record_length") {
    std::vector<double> x(n, 0.0);
    x[7] = 1.0;
    const auto psd = welch_psd(x, T, fs);
    CHECK(rad_to_hz(psd.freqs[1] - psd.freqs[0]) == doctest::Approx(25.0));
    CHECK(psd.size() == n / 2 + 1);
    CHECK(psd.n_avg == 1);
  }
  SUBCASE("sinusoid power is a^2/2") {
    const double a = 3e-9, f = 12345.0;
    std::vector<double> x(4 * n);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * std::sin(kTwoPi * f * double(i) / fs + 0.3);
    for (auto win : {Window::Hann, Window::Rectangular}) {
      const auto psd = welch_psd(x, T, fs, win);
      double area = 0;
      for (double v : psd.values) area += v * 25.0;
      CHECK(area == doctest::Approx(a * a / 2).epsilon(0.01));
      CHECK(psd.n_avg == 4);
    }
  }
  SUBCASE("white noise is flat at sigma^2 / (fs/2)") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 2.0);
    std::vector<double> x(100 * 4000);
    for (double& v : x) v = nd(rng);
    const auto psd = welch_psd(x, 0.004, fs);
    CHECK(psd.n_avg == 100);
    double mean = 0;
    for (std::size_t k = 1; k + 1 < psd.size(); ++k) mean += psd.values[k];
    mean /= double(psd.size() - 2);
    CHECK(mean == doctest::Approx(4.0 / (fs / 2)).epsilon(0.05));
    // Parseval on the same data
    double area = 0, var = 0;
    for (double v : psd.values) area += v * 250.0;
    for (double v : x) var += v * v;
    var /= double(x.size());
    CHECK(area == doctest::Approx(var).epsilon(0.005));
  }
  SUBCASE("too short") {
    std::vector<double> x(100, 1.0);
    CHECK_THROWS_AS(welch_psd(x, T, fs), InsufficientData);
  }
}

TEST_CASE("oracle: uncoupled simulation matches the analytic PSD") {
  auto spec = testing::baseline();
  spec.position.y0 = 0;  // g_y = 0
  const auto d = coupling::derive_all(spec);
  const auto sim = SimConfig::acquisition_defaults(spec.modes.omega_y, spec.detuning, d.kappa, 3);
  const auto rep = oracle_compare(spec, sim);
  CHECK(rep.rms_relative_error <= 0.10);
  CHECK(rep.scale_factor == doctest::Approx(1.0).epsilon(0.1));
  CHECK(rep.band_lo == 0.5 * spec.modes.omega_y);
  CHECK(rep.band_hi == 2.0 * spec.modes.omega_y);

  // linewidth from a Lorentzian fit with g frozen at zero
  auto init = params_from_spec(spec);
  init.gamma_m *= 1.3;
  init.background = 1e-3 * rep.simulated.values[std::size_t(spec.modes.omega_y / rep.simulated.freqs[1])];
  FreeMask mask;
  mask.set(Param::OmegaY, true).set(Param::GammaM, true).set(Param::AmpY, true).set(Param::Background, true);
  FitOptions fo;
  fo.masses = ModeMasses::uniform(spec.particle.mass);
  fo.band_lo = khz(150);
  fo.band_hi = khz(250);
  const auto fit = fit_psd(rep.simulated, init, mask, fo);
  CHECK(rel(fit.params.gamma_m, d.Gamma_m) < 0.10);
  CHECK(std::abs(fit.params.omega_y - spec.modes.omega_y) < hz_to_rad(25));
}
