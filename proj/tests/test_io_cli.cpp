#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cavitas/cli.hpp"
#include "cavitas/coupling.hpp"
#include "cavitas/errors.hpp"
#include "cavitas/io.hpp"
#include "support.hpp"

using namespace cavitas;
using testing::khz;
using testing::TempDir;

namespace {

std::filesystem::path baseline_path() { return testing::source_dir() / "configs" / "paper-baseline.json"; }

cli::CommandSpec command(cli::Subcommand sub) {
  cli::CommandSpec c;
  c.subcommand = sub;
  c.config_path = baseline_path();
  return c;
}

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const cli::CommandSpec& c) {
  std::ostringstream out, err;
  const int code = cli::run(c, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) { return io::read_file(p); }

}  // namespace

TEST_CASE("PSD CSV round trip") {
  PsdSeries s;
  s.n_avg = 25;
  s.meta["enbw_bins"] = "1.5";
  for (int i = 1; i <= 50; ++i) {
    s.freqs.push_back(hz_to_rad(25.0 * i));
    s.values.push_back(1e-24 * (1 + 0.37 * i));
  }
  const auto text = io::psd_to_csv(s);
  CHECK(text.rfind("# n_avg=25\n", 0) == 0);
  CHECK(text.find("freq_hz,psd_m2_per_hz\n") != std::string::npos);
  CHECK(text.find("\n125,") != std::string::npos);  // raw Hz
  const auto back = io::psd_from_csv(text);
  CHECK(back.n_avg == 25);
  CHECK(back.meta.at("enbw_bins") == "1.5");
  REQUIRE(back.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(back.freqs[i] == doctest::Approx(s.freqs[i]).epsilon(1e-14));
    CHECK(back.values[i] == doctest::Approx(s.values[i]).epsilon(1e-14));
  }
  CHECK_THROWS_AS(io::psd_from_csv("freq_hz,psd_m2_per_hz\n1,abc\n"), ParseError);
}

TEST_CASE("branch track CSV keeps missing cells") {
  BranchTrack t;
  t.coords = {-1.0, -0.5, 0.0};
  t.omega_plus = {10.0, std::nan(""), 12.0};
  t.omega_minus = {1.0, 2.0, std::nan("")};
  t.confidence = {1.0, 0.5, 0.25};
  const auto back = io::track_from_csv(io::track_to_csv(t));
  REQUIRE(back.size() == 3);
  CHECK(std::isnan(back.omega_plus[1]));
  CHECK(std::isnan(back.omega_minus[2]));
  CHECK(back.omega_plus[2] == 12.0);
  CHECK(back.confidence[1] == 0.5);
}

TEST_CASE("atomic_write replaces and leaves no temp files") {
  TempDir dir("atomic");
  const auto p = dir.path / "out.txt";
  io::atomic_write(p, "first");
  io::atomic_write(p, "second");
  CHECK(slurp(p) == "second");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path)) ++n;
  CHECK(n == 1);
  CHECK_THROWS_AS(io::atomic_write(dir.path / "missing" / "x.txt", "x"), IoError);
  CHECK_THROWS_AS(io::read_file(dir.path / "nope.csv"), IoError);
}

TEST_CASE("apply_overrides") {
  const auto spec = testing::baseline();
  CHECK(cli::apply_overrides(spec, {}) == spec);

  const auto low = cli::apply_overrides(spec, {"pressure=3e-7 mbar"});
  CHECK(spec.env.pressure == doctest::Approx(140.0));  // original untouched
  const auto d0 = coupling::derive_all(spec);
  const auto d1 = coupling::derive_all(low);
  CHECK(d1.Gamma_m / d0.Gamma_m == doctest::Approx(3e-7 / 1.4).epsilon(1e-12));
  CHECK(coupling::cooperativity(std::abs(d1.g_y), d1.kappa, d1.Gamma_m, d1.n_th) ==
        doctest::Approx(36).epsilon(0.2));

  const auto dotted = cli::apply_overrides(spec, {"environment.pressure=3e-7 mbar"});
  CHECK(dotted == low);
  const auto det = cli::apply_overrides(spec, {"detuning=-150 kHz"});
  CHECK(det.detuning == doctest::Approx(-khz(150)));
  CHECK(cli::apply_overrides(spec, {"cavity.finesse=2.7e5"}).cavity.finesse == 2.7e5);

  CHECK_THROWS_AS(cli::apply_overrides(spec, {"bogus=1"}), UnknownKey);
  CHECK_THROWS_AS(cli::apply_overrides(spec, {"wavelength=1 um"}), UnknownKey);  // ambiguous
  CHECK_THROWS_AS(cli::apply_overrides(spec, {"pressure=3 furlongs"}), UnitError);
  CHECK_THROWS(cli::apply_overrides(spec, {"pressure"}));
}

TEST_CASE("params prints the headline numbers") {
  const auto r = run(command(cli::Subcommand::Params));
  CHECK(r.code == 0);
  CHECK(r.out.find("κ=2π×10 kHz") != std::string::npos);
  CHECK(r.out.find("g_y=2π×22.") != std::string::npos);
  CHECK(r.out.find("C_CS=") != std::string::npos);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
}

TEST_CASE("exit codes") {
  TempDir dir("codes");
  auto c = command(cli::Subcommand::Fit);
  c.options.input_path = dir.path / "spectrum.csv";
  auto r = run(c);
  CHECK(r.code == 2);
  CHECK(r.err.find("spectrum.csv") != std::string::npos);

  c = command(cli::Subcommand::Params);
  c.config_path = dir.path / "nothing.json";
  r = run(c);
  CHECK(r.code == 2);
  CHECK(r.err.find("nothing.json") != std::string::npos);

  c = command(cli::Subcommand::Params);
  c.overrides = {"finesse=-5"};
  CHECK(run(c).code == 2);

  // blue detuning with strong coupling is parametrically unstable
  c = command(cli::Subcommand::Simulate);
  c.overrides = {"detuning=197 kHz", "pressure=1e-3 mbar"};
  c.output_path = dir.path / "blue.csv";
  r = run(c);
  CHECK(r.code == 4);
  CHECK_FALSE(std::filesystem::exists(dir.path / "blue.csv"));
}

TEST_CASE("sweep-detuning matches the spectral model and is reproducible") {
  TempDir dir("sweep");
  auto c = command(cli::Subcommand::SweepDetuning);
  c.options.delta_min = -1.5;
  c.options.delta_max = -0.7;
  c.options.steps = 80;
  c.options.f_min = 150e3;
  c.options.f_max = 250e3;
  c.output_path = dir.path / "map.csv";
  c.threads = 1;
  const std::string before = slurp(baseline_path());
  REQUIRE(run(c).code == 0);
  CHECK(slurp(baseline_path()) == before);

  // golden: the same map straight from the library
  const auto spec = testing::baseline();
  const auto deltas = linspace(-1.5 * spec.modes.omega_y, -0.7 * spec.modes.omega_y, 80);
  const auto golden = io::map_to_csv(sweep_detuning(spec, deltas, frequency_grid(150e3, 250e3, 25)));
  const std::string first = slurp(c.output_path.value());
  CHECK(first == golden);
  CHECK(first.rfind("delta_rad_s,150000,150025,", 0) == 0);
  CHECK(std::count(first.begin(), first.end(), '\n') == 81);

  c.threads = 4;
  REQUIRE(run(c).code == 0);
  CHECK(slurp(c.output_path.value()) == first);
  c.threads = 1;
  REQUIRE(run(c).code == 0);
  CHECK(slurp(c.output_path.value()) == first);
}

TEST_CASE("spectrum, fit and crossing-fit through files") {
  TempDir dir("fit");
  auto c = command(cli::Subcommand::Spectrum);
  c.options.n_avg = 25;
  c.options.f_min = 98.5e3;
  c.options.f_max = 394e3;
  c.seed = 7;
  c.output_path = dir.path / "psd.csv";
  REQUIRE(run(c).code == 0);
  const std::string psd = slurp(dir.path / "psd.csv");
  REQUIRE(run(c).code == 0);
  CHECK(slurp(dir.path / "psd.csv") == psd);
  c.seed = 8;
  REQUIRE(run(c).code == 0);
  CHECK(slurp(dir.path / "psd.csv") != psd);
  c.seed = 7;
  REQUIRE(run(c).code == 0);

  auto f = command(cli::Subcommand::Fit);
  f.options.input_path = dir.path / "psd.csv";
  f.output_path = dir.path / "fit.json";
  auto r = run(f);
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir.path / "fit.json"));
  const double g = std::abs(coupling::coupling_cs(testing::baseline()).g_y);
  CHECK(j["params"]["g_y"]["value"].get<double>() == doctest::Approx(g).epsilon(0.05));
  CHECK(j["converged"].get<bool>());
  CHECK(slurp(dir.path / "psd.csv") == psd);  // input untouched

  // a branch track straight from the closed form
  BranchTrack t;
  const double wm = khz(197), gg = khz(22.8);
  for (double s : linspace(-1.5, -0.8, 15)) {
    const auto h = hybrid_frequencies(wm, s * wm, gg);
    t.coords.push_back(s * wm);
    t.omega_plus.push_back(h.omega_plus);
    t.omega_minus.push_back(h.omega_minus);
  }
  io::atomic_write(dir.path / "track.csv", io::track_to_csv(t));
  auto x = command(cli::Subcommand::CrossingFit);
  x.options.input_path = dir.path / "track.csv";
  r = run(x);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("22.8") != std::string::npos);
}

TEST_CASE("CAVITAS_CONFIG fallback") {
  auto c = command(cli::Subcommand::Params);
  c.config_path.reset();
  ::setenv("CAVITAS_CONFIG", baseline_path().c_str(), 1);
  CHECK(run(c).code == 0);
  ::unsetenv("CAVITAS_CONFIG");
  CHECK(run(c).code == 2);
}
