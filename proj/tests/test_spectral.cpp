#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "cavitas/coupling.hpp"
#include "cavitas/spectral_model.hpp"
#include "support.hpp"

using namespace cavitas;
using testing::khz;
using testing::rel;

namespace {

constexpr double kMass = 6.4e-18;

SpectrumModelParams nms(double g, double detuning_over_omega = -1.0) {
  SpectrumModelParams p;
  p.omega_x = khz(172);
  p.omega_y = khz(197);
  p.omega_z = khz(56);
  p.gamma_m = khz(0.8);
  p.g_y = g;
  p.kappa = khz(10);
  p.detuning = detuning_over_omega * p.omega_y;
  p.amp_y = 1.0;
  return p;
}

// Interior local maxima of y on x, sorted by x.
std::vector<double> local_maxima(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (y[i] > y[i - 1] && y[i] >= y[i + 1]) out.push_back(x[i]);
  }
  return out;
}

std::vector<double> dense(double lo, double hi, double step) {
  std::vector<double> w;
  for (double v = lo; v <= hi; v += step) w.push_back(v);
  return w;
}

// Formula oracle written out independently of the library.
double gamma_opt_oracle(double W, double Om, double g, double k, double D) {
  return g * g * (Om / W) * (k / ((D + W) * (D + W) + k * k / 4) - k / ((D - W) * (D - W) + k * k / 4));
}

double shift_oracle(double W, double Om, double g, double k, double D) {
  return g * g * (Om / W) *
         ((D + W) / ((D + W) * (D + W) + k * k / 4) + (D - W) / ((D - W) * (D - W) + k * k / 4));
}

}  // namespace

TEST_CASE("hybrid frequencies") {
  const double Om = khz(197), g = khz(22.8);
  auto h = hybrid_frequencies(Om, -Om, g);
  CHECK(h.splitting == 2 * g);
  CHECK(h.omega_plus == Om + g);
  CHECK(h.omega_minus == Om - g);
  CHECK(h.omega_plus == doctest::Approx(khz(219.8)).epsilon(1e-12));
  CHECK(h.omega_minus == doctest::Approx(khz(174.2)).epsilon(1e-12));

  h = hybrid_frequencies(Om, -1.5 * Om, 0.0);
  CHECK(h.omega_plus == doctest::Approx(1.5 * Om).epsilon(1e-15));
  CHECK(h.omega_minus == doctest::Approx(Om).epsilon(1e-15));
  h = hybrid_frequencies(Om, -Om, 0.0);
  CHECK(h.omega_plus == Om);
  CHECK(h.omega_minus == Om);

  for (double d = -2.0; d <= 0.0; d += 0.01) {
    const auto hd = hybrid_frequencies(Om, d * Om, g);
    CHECK(hd.splitting >= 2 * g);
    CHECK(hd.omega_plus >= hd.omega_minus);
    CHECK(hd.splitting == doctest::Approx(hd.omega_plus - hd.omega_minus).epsilon(1e-15));
  }

  h = hybrid_frequencies(Om, -100 * Om, g);
  CHECK(rel(h.omega_minus, Om) < 1e-3);
  CHECK(rel(h.omega_plus, 100 * Om) < 1e-3);
}

TEST_CASE("optical damping") {
  const double g = khz(22.8);
  auto p = nms(g);
  const double Om = p.omega_y, k = p.kappa;
  for (double W : {0.5 * Om, 0.9 * Om, Om, 1.3 * Om}) {
    CHECK(optical_damping(W, p) == doctest::Approx(gamma_opt_oracle(W, Om, g, k, -Om)).epsilon(1e-13));
  }
  const double at = optical_damping(Om, p);
  CHECK(at > 0);
  CHECK(at == doctest::Approx(4 * g * g / k * (1 - k * k / (16 * Om * Om + k * k))).epsilon(1e-13));
  CHECK(rel(at, 4 * g * g / k) <= k * k / (16 * Om * Om) + 1e-12);

  p.g_y = 0;
  CHECK(optical_damping(Om, p) == 0.0);
  p = nms(g, 0.0);
  for (double W : {0.5 * Om, Om, 2 * Om}) CHECK(optical_damping(W, p) == 0.0);
  // blue detuning anti-damps
  p = nms(g, 1.0);
  CHECK(optical_damping(Om, p) < 0);
}

TEST_CASE("spring shift") {
  const double g = khz(22.8);
  auto p = nms(g);
  const double Om = p.omega_y, k = p.kappa;
  for (double W : {0.5 * Om, Om, 1.3 * Om}) {
    CHECK(spring_shift(W, p) == doctest::Approx(shift_oracle(W, Om, g, k, -Om)).epsilon(1e-13));
  }
  const double reduced = -g * g * (2 * Om) / (4 * Om * Om + k * k / 4);
  CHECK(spring_shift(Om, p) == doctest::Approx(reduced).epsilon(1e-12));
  // the bracket is even in Omega and Om/W is odd, so the product Omega * dOmega
  // (the combination entering |chi|^2) is even
  for (double W : {0.3 * Om, Om, 1.7 * Om}) {
    CHECK(-W * spring_shift(-W, p) == doctest::Approx(W * spring_shift(W, p)).epsilon(1e-13));
  }
  p.g_y = 0;
  CHECK(spring_shift(Om, p) == 0.0);
}

TEST_CASE("uncoupled susceptibility is a damped oscillator") {
  auto p = nms(0.0);
  p.gamma_m = 1e-4 * p.omega_y;
  const double Om = p.omega_y;
  CHECK(susceptibility_sq(Om, p, kMass) == doctest::Approx(1 / (kMass * kMass * Om * Om * p.gamma_m * p.gamma_m)).epsilon(1e-3));
  // FWHM = Gamma_m
  const double peak = susceptibility_sq(Om, p, kMass);
  const double hi = Om + p.gamma_m / 2, lo = Om - p.gamma_m / 2;
  CHECK(susceptibility_sq(hi, p, kMass) / peak == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(susceptibility_sq(lo, p, kMass) / peak == doctest::Approx(0.5).epsilon(2e-3));
  for (double W : {0.1 * Om, Om, 3 * Om}) {
    const double v = susceptibility_sq(W, p, kMass);
    CHECK(std::isfinite(v));
    CHECK(v > 0);
  }
}

TEST_CASE("normal mode splitting in |chi|^2") {
  const double Om = khz(197);
  const auto w = dense(0.7 * Om, 1.3 * Om, khz(0.01));
  SUBCASE("g = 2.3 kappa") {
    auto p = nms(2.3 * khz(10));
    std::vector<double> y;
    for (double W : w) y.push_back(susceptibility_sq(W, p, kMass));
    const auto maxima = local_maxima(w, y);
    REQUIRE(maxima.size() == 2);
    CHECK(rel(maxima[1] - maxima[0], 2 * p.g_y) < 0.05);
    const auto h = hybrid_frequencies(Om, -Om, p.g_y);
    const double tol = (p.kappa + p.gamma_m) / 2;
    CHECK(std::abs(maxima[0] - h.omega_minus) < tol);
    CHECK(std::abs(maxima[1] - h.omega_plus) < tol);
  }
  SUBCASE("g = 0.46 kappa still splits") {
    auto p = nms(0.46 * khz(10));
    std::vector<double> y;
    for (double W : w) y.push_back(susceptibility_sq(W, p, kMass));
    CHECK(local_maxima(w, y).size() == 2);
  }
}

TEST_CASE("psd_model composition") {
  const auto m = ModeMasses::uniform(kMass);
  auto p = nms(khz(22.8));
  const double Om = p.omega_y;
  CHECK(psd_model(0.9 * Om, p, m) == susceptibility_sq(0.9 * Om, p, kMass));

  p.amp_y = 0;
  p.background = 3e-25;
  for (double W : {khz(10), Om, khz(400)}) CHECK(psd_model(W, p, m) == 3e-25);

  // baseline-like: doublet around Omega_y plus an x peak
  p = nms(khz(22.8));
  p.background = 1e-30;
  const auto w = dense(khz(150), khz(240), khz(0.01));
  std::vector<double> y;
  for (double W : w) y.push_back(psd_model(W, p, m));
  const auto doublet = local_maxima(w, y);
  REQUIRE(doublet.size() == 2);
  const auto h = hybrid_frequencies(Om, -Om, p.g_y);
  CHECK(std::abs(doublet[0] - h.omega_minus) < (p.kappa + p.gamma_m) / 2);
  CHECK(std::abs(doublet[1] - h.omega_plus) < (p.kappa + p.gamma_m) / 2);

  // the narrow x line sits on the lower branch's flank
  p.amp_x = 0.3;
  std::vector<double> yx;
  for (std::size_t i = 0; i < w.size(); ++i) {
    yx.push_back(psd_model(w[i], p, m));
    CHECK(yx.back() >= y[i]);
    CHECK(yx.back() >= p.background);
  }
  const auto with_x = local_maxima(w, yx);
  REQUIRE(!with_x.empty());
  CHECK(std::abs(with_x.front() - p.omega_x) < khz(0.1));
  CHECK(std::abs(with_x.back() - h.omega_plus) < (p.kappa + p.gamma_m) / 2);
}

TEST_CASE("frequency grid") {
  const auto g = default_frequency_grid();
  REQUIRE(g.size() == 20000);
  CHECK(g.front() == hz_to_rad(25.0));
  CHECK(g.back() == hz_to_rad(500e3));
  CHECK(g[1] - g[0] == doctest::Approx(hz_to_rad(25.0)));
  CHECK(frequency_grid(1, 10, 1).size() == 10);
  CHECK(frequency_grid(10, 1, 1).empty());
}

TEST_CASE("synthetic spectra") {
  const auto m = ModeMasses::uniform(kMass);
  auto p = nms(khz(22.8));
  const auto grid = default_frequency_grid();
  const auto model = evaluate_psd(grid, p, m);

  SUBCASE("deterministic in the seed") {
    const auto a = synthesize_spectrum(p, grid, 25, 7, m);
    const auto b = synthesize_spectrum(p, grid, 25, 7, m);
    const auto c = synthesize_spectrum(p, grid, 25, 8, m);
    CHECK(a.values == b.values);
    CHECK(a.values != c.values);
    CHECK(a.n_avg == 25);
    CHECK_NOTHROW(a.check());
  }
  SUBCASE("converges to the model at large n_avg") {
    const auto s = synthesize_spectrum(p, grid, 10000, 1, m);
    double mean = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) mean += s.values[i] / model[i];
    mean /= double(grid.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.01));
    double worst = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, std::abs(s.values[i] / model[i] - 1));
    CHECK(worst < 0.06);  // ~6 sigma at 1 %
  }
  SUBCASE("per-bin relative spread is 1/sqrt(n_avg)") {
    for (int n : {1, 5, 25, 100}) {
      // one bin, many seeds
      std::vector<double> r;
      const std::vector<double> one{p.omega_y};
      for (std::uint64_t seed = 0; seed < 4000; ++seed) {
        r.push_back(synthesize_spectrum(p, one, n, seed, m).values[0] / psd_model(p.omega_y, p, m));
      }
      const double mean = std::accumulate(r.begin(), r.end(), 0.0) / double(r.size());
      double var = 0;
      for (double x : r) var += (x - mean) * (x - mean);
      const double sd = std::sqrt(var / double(r.size() - 1));
      CHECK(sd == doctest::Approx(1 / std::sqrt(double(n))).epsilon(0.05));
    }
  }
}

TEST_CASE("thermal amplitude and params_from_spec") {
  const auto s = testing::baseline();
  const auto d = coupling::derive_all(s);
  CHECK(thermal_amplitude(kMass, 2.0, 300.0) == doctest::Approx(4 * kMass * 2.0 * 1.380649e-23 * 300.0).epsilon(1e-15));
  MapOptions o;
  o.rel_amp_x = 0.5;
  o.omega_offset = khz(5);
  const auto p = params_from_spec(s, o);
  CHECK(p.g_y == d.g_y);
  CHECK(p.kappa == d.kappa);
  CHECK(p.gamma_m == d.Gamma_m);
  CHECK(p.omega_y == s.modes.omega_y + khz(5));
  CHECK(p.amp_x == 0.5 * p.amp_y);
  CHECK(p.amp_z == 0.0);
  // equipartition: the integral of the uncoupled PSD is kB T / (m Omega^2)
  auto q = params_from_spec(s);
  q.g_y = 0;
  double area = 0;
  const auto w = dense(khz(150), khz(250), khz(0.002));
  for (double W : w) area += psd_model(W, q, ModeMasses::uniform(kMass)) * 2.0 / kTwoPi * 1e3;
  const double expected = 1.380649e-23 * 298.0 / (kMass * s.modes.omega_y * s.modes.omega_y);
  CHECK(area == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("detuning sweep") {
  const auto s = testing::baseline();
  const auto freqs = frequency_grid(100e3, 300e3, 100);
  const auto deltas = linspace(-1.5 * s.modes.omega_y, -0.7 * s.modes.omega_y, 17);
  MapOptions one;
  one.threads = 1;
  MapOptions four;
  four.threads = 4;
  const auto a = sweep_detuning(s, deltas, freqs, one);
  const auto b = sweep_detuning(s, deltas, freqs, four);
  CHECK(a.rows == b.rows);
  CHECK(a.coord_name == "delta_rad_s");
  REQUIRE(a.rows.size() == deltas.size());
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    auto r = s;
    r.detuning = deltas[i];
    CHECK(a.rows[i] == evaluate_psd(freqs, params_from_spec(r), ModeMasses::uniform(s.particle.mass)));
  }

  // y0 = 0 gives an uncoupled line, and so does P = 0
  auto y0 = s;
  y0.position.y0 = 0;
  auto p0 = s;
  p0.trap.power = 0;
  const auto my = sweep_detuning(y0, deltas, freqs);
  const auto mp = sweep_detuning(p0, deltas, freqs);
  CHECK(my.rows == mp.rows);
  for (const auto& row : my.rows) {
    const auto maxima = local_maxima(my.freqs, row);
    REQUIRE(maxima.size() == 1);
    CHECK(std::abs(maxima[0] - s.modes.omega_y) <= hz_to_rad(100));
  }
  MapOptions shifted;
  shifted.omega_offset = khz(5);
  const auto ms = sweep_detuning(y0, deltas, freqs, shifted);
  CHECK(std::abs(local_maxima(ms.freqs, ms.rows[0])[0] - khz(202)) <= hz_to_rad(100));
}

TEST_CASE("position sweep") {
  const auto s = testing::baseline();
  const double lc = s.cavity.wavelength;
  const auto freqs = frequency_grid(150e3, 250e3, 25);
  const auto y0s = linspace(0.0, lc / 2, 9);  // steps of lambda_c / 16
  const auto map = sweep_position(s, y0s, freqs);
  CHECK(map.coord_name == "y0_m");
  auto peaks = [&](std::size_t i) { return local_maxima(map.freqs, map.rows[i]).size(); };
  CHECK(peaks(0) == 1);  // intensity maximum
  CHECK(peaks(8) == 1);
  CHECK(peaks(4) == 2);  // lambda_c / 4
  // branch positions follow Omega_m +/- |g_y| at Delta = -Omega_m
  const auto m = local_maxima(map.freqs, map.rows[4]);
  auto r = s;
  r.position.y0 = y0s[4];
  const double g = std::abs(coupling::coupling_cs(r).g_y);
  const double tol = (s.cavity.linewidth() + coupling::derive_all(s).Gamma_m) / 2;
  CHECK(std::abs(m[0] - (s.modes.omega_y - g)) < tol);
  CHECK(std::abs(m[1] - (s.modes.omega_y + g)) < tol);
}

TEST_CASE("linspace") {
  const auto v = linspace(-1, 1, 5);
  CHECK(v == std::vector<double>{-1, -0.5, 0, 0.5, 1});
  CHECK(linspace(3, 4, 1) == std::vector<double>{3});
  CHECK(linspace(3, 4, 0).empty());
}
