#include "cavitas/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "cavitas/constants.hpp"
#include "cavitas/coupling.hpp"
#include "cavitas/errors.hpp"
#include "cavitas/fit.hpp"
#include "cavitas/io.hpp"
#include "cavitas/langevin.hpp"
#include "cavitas/parallel.hpp"
#include "cavitas/spectral_model.hpp"
#include "cavitas/units.hpp"

namespace cavitas::cli {

using nlohmann::json;

std::string_view to_string(Subcommand sub) {
  switch (sub) {
    case Subcommand::Params: return "params";
    case Subcommand::Spectrum: return "spectrum";
    case Subcommand::SweepDetuning: return "sweep-detuning";
    case Subcommand::SweepPosition: return "sweep-position";
    case Subcommand::Simulate: return "simulate";
    case Subcommand::Fit: return "fit";
    case Subcommand::CrossingFit: return "crossing-fit";
    case Subcommand::PositionFit: return "position-fit";
    case Subcommand::Cooperativity: return "cooperativity";
  }
  return "?";
}

// ---------------------------------------------------------------- overrides

namespace {

// Config keys by section, as accepted by parse_spec.
const std::map<std::string, std::vector<std::string>>& config_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"particle", {"radius", "diameter", "mass", "density", "refractive_index"}},
      {"trap", {"wavelength", "power", "waist_x", "waist_y", "polarization_angle", "na"}},
      {"cavity", {"wavelength", "finesse", "fsr", "waist"}},
      {"environment", {"pressure", "temperature", "gas_molecular_mass", "recoil_rate"}},
      {"position", {"y0", "dz", "dx"}},
      {"modes", {"omega_x", "omega_y", "omega_z"}},
  };
  return keys;
}

std::pair<std::string, std::string> resolve_key(const std::string& key) {
  if (key == "detuning") return {"", "detuning"};
  const auto dot = key.find('.');
  if (dot != std::string::npos) {
    const auto section = key.substr(0, dot);
    const auto leaf = key.substr(dot + 1);
    const auto it = config_keys().find(section);
    if (it == config_keys().end() || std::find(it->second.begin(), it->second.end(), leaf) == it->second.end()) {
      throw UnknownKey(key);
    }
    return {section, leaf};
  }
  std::vector<std::string> sections;
  for (const auto& [section, leaves] : config_keys()) {
    if (std::find(leaves.begin(), leaves.end(), key) != leaves.end()) sections.push_back(section);
  }
  if (sections.empty()) throw UnknownKey(key);
  if (sections.size() > 1) {
    throw UnknownKey(key + " (ambiguous, use " + sections[0] + "." + key + " or " + sections[1] + "." + key + ")");
  }
  return {sections[0], key};
}

}  // namespace

ExperimentSpec apply_overrides(const ExperimentSpec& spec, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return spec;
  json doc = to_json(spec);
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("override '" + item + "' is not key=value");
    const auto [section, leaf] = resolve_key(item.substr(0, eq));
    const std::string value = item.substr(eq + 1);
    if (section.empty()) {
      doc[leaf] = value;
      continue;
    }
    auto& obj = doc[section];
    // keep the mutually exclusive pairs consistent
    if (leaf == "density") obj.erase("mass");
    if (leaf == "mass") obj.erase("density");
    if (leaf == "diameter") obj.erase("radius");
    if (leaf == "radius") obj.erase("diameter");
    obj[leaf] = value;
  }
  return parse_spec(doc);
}

// ---------------------------------------------------------------- run

namespace {

std::string khz(double omega) {
  std::ostringstream os;
  os << "2π×" << std::setprecision(4) << rad_to_hz(omega) / 1e3 << " kHz";
  return os.str();
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

bool wants_json(const std::filesystem::path& path) { return path.extension() == ".json"; }

void write_json(const std::filesystem::path& path, const json& j) { io::atomic_write(path, j.dump(2) + "\n"); }

json psd_json(const PsdSeries& psd) {
  json j;
  j["n_avg"] = psd.n_avg;
  j["meta"] = psd.meta;
  j["freq_hz"] = json::array();
  for (double w : psd.freqs) j["freq_hz"].push_back(rad_to_hz(w));
  j["psd_m2_per_hz"] = psd.values;
  return j;
}

void write_psd(const std::filesystem::path& path, const PsdSeries& psd) {
  if (wants_json(path)) {
    write_json(path, psd_json(psd));
  } else {
    io::atomic_write(path, io::psd_to_csv(psd));
  }
}

void write_map(const std::filesystem::path& path, const SpectrumMap& map) {
  if (wants_json(path)) {
    json j;
    j["coord_name"] = map.coord_name;
    j["coords"] = map.coords;
    j["freq_hz"] = json::array();
    for (double w : map.freqs) j["freq_hz"].push_back(rad_to_hz(w));
    j["rows"] = map.rows;
    write_json(path, j);
  } else {
    io::atomic_write(path, io::map_to_csv(map));
  }
}

ExperimentSpec resolve_spec(const CommandSpec& cmd) {
  auto path = cmd.config_path ? cmd.config_path : default_config_path();
  if (!path) throw ValidationError("config", "no --config given and CAVITAS_CONFIG is unset");
  return apply_overrides(load_spec(*path), cmd.overrides);
}

MapOptions map_options(const CommandSpec& cmd) {
  MapOptions m;
  m.rel_amp_x = cmd.options.rel_amp_x;
  m.rel_amp_z = cmd.options.rel_amp_z;
  m.background = cmd.options.background;
  m.threads = cmd.threads == 0 ? default_threads() : cmd.threads;
  return m;
}

std::vector<double> grid_of(const CommandOptions& o) { return frequency_grid(o.f_min, o.f_max, o.f_step); }

std::string read_input(const CommandSpec& cmd) {
  if (!cmd.options.input_path) throw ValidationError("input", "--input is required");
  const auto& path = *cmd.options.input_path;
  if (!std::filesystem::exists(path)) throw IoError("input file not found: '" + path.string() + "'");
  return io::read_file(path);
}

int cmd_params(const CommandSpec& cmd, std::ostream& out) {
  const auto spec = resolve_spec(cmd);
  const auto d = coupling::derive_all(spec);
  const double c = coupling::cooperativity(std::abs(d.g_y), d.kappa, d.Gamma_m, d.n_th, spec.env.recoil_rate);
  if (cmd.output_path) {
    auto j = io::to_json(d);
    j["cooperativity"] = c;
    write_json(*cmd.output_path, j);
  }
  out << "κ=" << khz(d.kappa) << " g_y=" << khz(std::abs(d.g_y)) << " g_y^max=" << khz(d.g_y_max)
      << " Γ_m=" << khz(d.Gamma_m) << " n_th=" << sci(d.n_th) << " C_CS=" << sci(c) << "\n";
  return 0;
}

int cmd_cooperativity(const CommandSpec& cmd, std::ostream& out) {
  const auto spec = resolve_spec(cmd);
  const auto d = coupling::derive_all(spec);
  const double g = std::abs(d.g_y);
  const double c = coupling::cooperativity(g, d.kappa, d.Gamma_m, d.n_th, spec.env.recoil_rate);
  const double c_no_recoil = coupling::cooperativity(g, d.kappa, d.Gamma_m, d.n_th, 0.0);
  // drive coupling is largest at sin(2 phi) = 1
  auto at_slope = spec;
  at_slope.position.y0 = spec.cavity.wavelength / 8.0;
  const auto drive = coupling::coupling_drive(at_slope, cmd.options.n_cav);
  const double ratio = g / std::abs(drive.enhanced);
  if (cmd.output_path) {
    write_json(*cmd.output_path, {{"cooperativity", c},
                                  {"cooperativity_without_recoil", c_no_recoil},
                                  {"g_y_rad_s", g},
                                  {"kappa_rad_s", d.kappa},
                                  {"Gamma_m_rad_s", d.Gamma_m},
                                  {"n_th", d.n_th},
                                  {"recoil_rate_rad_s", spec.env.recoil_rate},
                                  {"n_cav", cmd.options.n_cav},
                                  {"g_dr_single_rad_s", std::abs(drive.single)},
                                  {"g_dr_enhanced_rad_s", std::abs(drive.enhanced)},
                                  {"cs_to_drive_ratio", ratio}});
  }
  out << "C_CS=" << sci(c) << " g_y=" << khz(g) << " g_dr√n_cav=" << khz(std::abs(drive.enhanced))
      << " ratio=" << sci(ratio) << "\n";
  return 0;
}

int cmd_spectrum(const CommandSpec& cmd, std::ostream& out) {
  const auto spec = resolve_spec(cmd);
  const auto p = params_from_spec(spec, map_options(cmd));
  const auto grid = grid_of(cmd.options);
  const auto masses = ModeMasses::uniform(spec.particle.mass);
  PsdSeries psd;
  if (cmd.options.n_avg > 0) {
    psd = synthesize_spectrum(p, grid, cmd.options.n_avg, cmd.seed, masses);
    psd.meta["seed"] = std::to_string(cmd.seed);
  } else {
    psd.freqs = grid;
    psd.values = evaluate_psd(grid, p, masses);
    psd.meta["kind"] = "model";
  }
  if (cmd.output_path) write_psd(*cmd.output_path, psd);
  const auto hyb = hybrid_frequencies(p.omega_y, p.detuning, std::abs(p.g_y));
  out << "bins=" << psd.size() << " Ω_+=" << khz(hyb.omega_plus) << " Ω_-=" << khz(hyb.omega_minus)
      << " g_y=" << khz(std::abs(p.g_y)) << "\n";
  return 0;
}

int cmd_sweep_detuning(const CommandSpec& cmd, std::ostream& out, std::ostream& err) {
  const auto spec = resolve_spec(cmd);
  const auto& o = cmd.options;
  if (o.steps < 2) throw ValidationError("steps", "must be ≥ 2");
  auto deltas = linspace(o.delta_min * spec.modes.omega_y, o.delta_max * spec.modes.omega_y, o.steps);
  const auto grid = grid_of(o);
  err << "sweep-detuning: " << deltas.size() << " rows x " << grid.size() << " bins\n";
  const auto map = sweep_detuning(spec, deltas, grid, map_options(cmd));
  if (cmd.output_path) write_map(*cmd.output_path, map);
  const double g = std::abs(coupling::coupling_cs(spec).g_y);
  out << "rows=" << map.rows.size() << " bins=" << grid.size() << " g_y=" << khz(g)
      << " min gap=" << khz(2.0 * g) << " at Δ=-Ω_y\n";
  return 0;
}

int cmd_sweep_position(const CommandSpec& cmd, std::ostream& out, std::ostream& err) {
  const auto spec = resolve_spec(cmd);
  const auto& o = cmd.options;
  if (o.steps < 2) throw ValidationError("steps", "must be ≥ 2");
  const double lo = o.y0_min.value_or(0.0);
  const double hi = o.y0_max.value_or(spec.cavity.wavelength / 2.0);
  const auto y0s = linspace(lo, hi, o.steps);
  const auto grid = grid_of(o);
  err << "sweep-position: " << y0s.size() << " rows x " << grid.size() << " bins\n";
  const auto map = sweep_position(spec, y0s, grid, map_options(cmd));
  if (cmd.output_path) write_map(*cmd.output_path, map);
  auto at_max = spec;
  at_max.position.y0 = spec.cavity.wavelength / 4.0;
  out << "rows=" << map.rows.size() << " bins=" << grid.size()
      << " |g_y|max=" << khz(std::abs(coupling::coupling_cs(at_max).g_y))
      << " period=" << sci(spec.cavity.wavelength / 2.0) << " m\n";
  return 0;
}

int cmd_simulate(const CommandSpec& cmd, std::ostream& out, std::ostream& err) {
  const auto spec = resolve_spec(cmd);
  auto sim = SimConfig::acquisition_defaults(spec.modes.omega_y, spec.detuning,
                                             spec.cavity.linewidth(), cmd.seed);
  sim.include_cavity_input_noise = cmd.options.cavity_noise;
  err << "simulate: " << sim.n_records << " x " << sim.record_length * 1e3 << " ms, dt="
      << sim.dt << " s\n";
  const auto series = simulate(spec, sim);
  auto psd = welch_psd(series.q, sim.record_length, sim.sample_rate, Window::Hann);
  psd.meta["seed"] = std::to_string(cmd.seed);
  if (cmd.output_path) write_psd(*cmd.output_path, psd);
  if (cmd.options.series_path) io::atomic_write(*cmd.options.series_path, io::series_to_csv(series));
  double var = 0.0;
  for (double q : series.q) var += q * q;
  var /= double(series.q.size());
  out << "samples=" << series.q.size() << " bins=" << psd.size() << " rms=" << sci(std::sqrt(var))
      << " m\n";
  return 0;
}

// Rescales the amplitudes of `p` so the model matches the data's median level in band.
SpectrumModelParams scale_to_data(SpectrumModelParams p, const PsdSeries& data, const FitOptions& fo) {
  std::vector<double> ratios, levels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.freqs[i];
    if (w < fo.band_lo || w > fo.band_hi || !(data.values[i] > 0.0)) continue;
    const double m = psd_model(w, p, fo.masses);
    if (m > 0.0) ratios.push_back(data.values[i] / m);
    levels.push_back(data.values[i]);
  }
  if (ratios.empty()) throw InsufficientData("no positive PSD bins inside the fit band");
  std::nth_element(ratios.begin(), ratios.begin() + long(ratios.size() / 2), ratios.end());
  std::nth_element(levels.begin(), levels.begin() + long(levels.size() / 2), levels.end());
  const double s = ratios[ratios.size() / 2];
  p.amp_x *= s;
  p.amp_y *= s;
  p.amp_z *= s;
  p.background = p.background > 0.0 ? p.background * s : 1e-3 * levels[levels.size() / 2];
  return p;
}

int cmd_fit(const CommandSpec& cmd, std::ostream& out) {
  const auto text = read_input(cmd);
  const auto spec = resolve_spec(cmd);
  const auto data = io::psd_from_csv(text);
  FitOptions fo;
  fo.masses = ModeMasses::uniform(spec.particle.mass);
  fo.band_lo = hz_to_rad(cmd.options.band_min.value_or(rad_to_hz(spec.modes.omega_y) / 2.0));
  fo.band_hi = hz_to_rad(cmd.options.band_max.value_or(rad_to_hz(spec.modes.omega_y) * 2.0));
  fo.multistart_seed = cmd.seed;
  auto init = params_from_spec(spec, map_options(cmd));
  init = scale_to_data(init, data, fo);
  auto mask = FreeMask::defaults();
  if (!(init.amp_x > 0.0)) mask.set(Param::AmpX, false);
  if (!(init.amp_z > 0.0)) mask.set(Param::AmpZ, false);
  const auto fit = fit_psd(data, init, mask, fo);
  if (cmd.output_path) write_json(*cmd.output_path, io::to_json(fit));
  out << "g_y=" << khz(fit.params.g_y) << " κ=" << khz(fit.params.kappa) << " Γ_m="
      << khz(fit.params.gamma_m) << " Ω_y=" << khz(fit.params.omega_y)
      << " χ²_red=" << sci(fit.chi2_reduced) << (fit.converged ? "" : " (not converged)") << "\n";
  return fit.converged ? 0 : 3;
}

int cmd_crossing_fit(const CommandSpec& cmd, std::ostream& out) {
  const auto track = io::track_from_csv(read_input(cmd));
  const auto fit = fit_avoided_crossing(track);
  if (cmd.output_path) write_json(*cmd.output_path, io::to_json(fit));
  out << "g=" << khz(fit.best.g) << " ± " << khz(fit.best.stderr_g) << " Ω_m=" << khz(fit.best.omega_m)
      << (fit.joint ? "" : " (single branch)") << "\n";
  return 0;
}

int cmd_position_fit(const CommandSpec& cmd, std::ostream& out) {
  const auto text = read_input(cmd);
  const auto spec = resolve_spec(cmd);
  const auto [y0, g] = io::position_track_from_csv(text);
  const auto fit = fit_position_sinusoid(y0, g, spec.cavity.wavelength);
  if (cmd.output_path) write_json(*cmd.output_path, io::to_json(fit));
  out << "g_max=" << khz(fit.g_max) << " ± " << khz(fit.stderr_g) << " y_offset=" << sci(fit.y_offset)
      << " m\n";
  return 0;
}

int dispatch(const CommandSpec& cmd, std::ostream& out, std::ostream& err) {
  switch (cmd.subcommand) {
    case Subcommand::Params: return cmd_params(cmd, out);
    case Subcommand::Spectrum: return cmd_spectrum(cmd, out);
    case Subcommand::SweepDetuning: return cmd_sweep_detuning(cmd, out, err);
    case Subcommand::SweepPosition: return cmd_sweep_position(cmd, out, err);
    case Subcommand::Simulate: return cmd_simulate(cmd, out, err);
    case Subcommand::Fit: return cmd_fit(cmd, out);
    case Subcommand::CrossingFit: return cmd_crossing_fit(cmd, out);
    case Subcommand::PositionFit: return cmd_position_fit(cmd, out);
    case Subcommand::Cooperativity: return cmd_cooperativity(cmd, out);
  }
  return 2;
}

}  // namespace

int run(const CommandSpec& cmd, std::ostream& out, std::ostream& err) {
  const std::string name(to_string(cmd.subcommand));
  try {
    return dispatch(cmd, out, err);
  } catch (const StabilityError& e) {
    err << name << ": simulation unstable: " << e.what() << "\n";
    return 4;
  } catch (const DegenerateFit& e) {
    err << name << ": fit failed: " << e.what() << "\n";
    return 3;
  } catch (const NonFiniteModel& e) {
    err << name << ": fit failed: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << name << ": " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << name << ": " << e.what() << "\n";
    return 2;
  }
}

// ---------------------------------------------------------------- argv

int main_entry(int argc, char** argv) {
  CLI::App app{"Coherent-scattering cavity optomechanics: coupling, spectra, simulation, fits"};
  app.require_subcommand(1);

  CommandSpec cmd;
  std::string config, output;
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string y0_min, y0_max, input, series;
  double band_min = NAN, band_max = NAN;
  auto& o = cmd.options;

  auto common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config) {
      sub->add_option("-c,--config", config, "experiment JSON (default: $CAVITAS_CONFIG)");
      sub->add_option("-s,--set", overrides, "override a config value, key=value (repeatable)");
    }
    sub->add_option("-o,--output", output, "output file (.csv or .json)");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--threads", threads, "worker threads (default: all cores)");
  };
  auto grid = [&](CLI::App* sub) {
    sub->add_option("--f-min", o.f_min, "first grid frequency, Hz");
    sub->add_option("--f-max", o.f_max, "last grid frequency, Hz");
    sub->add_option("--f-step", o.f_step, "grid spacing, Hz");
    sub->add_option("--rel-amp-x", o.rel_amp_x, "x-mode amplitude relative to y");
    sub->add_option("--rel-amp-z", o.rel_amp_z, "z-mode amplitude relative to y");
    sub->add_option("--background", o.background, "flat background, m^2/Hz");
  };

  std::map<CLI::App*, Subcommand> subs;
  auto add = [&](Subcommand s, const std::string& help) {
    auto* sub = app.add_subcommand(std::string(to_string(s)), help);
    subs[sub] = s;
    return sub;
  };

  auto* params = add(Subcommand::Params, "derived couplings, rates and cooperativity");
  common(params);
  auto* coop = add(Subcommand::Cooperativity, "cooperativity and CS versus drive coupling");
  common(coop);
  coop->add_option("--n-cav", o.n_cav, "intracavity photon number for the driven comparison");
  auto* spectrum = add(Subcommand::Spectrum, "model or synthetic PSD at the configured point");
  common(spectrum);
  grid(spectrum);
  spectrum->add_option("--n-avg", o.n_avg, "averages for a synthetic spectrum (0 = noiseless model)");
  auto* sd = add(Subcommand::SweepDetuning, "PSD map versus detuning");
  common(sd);
  grid(sd);
  sd->add_option("--delta-min", o.delta_min, "first detuning in units of Ω_y");
  sd->add_option("--delta-max", o.delta_max, "last detuning in units of Ω_y");
  sd->add_option("--steps", o.steps, "number of rows");
  auto* sp = add(Subcommand::SweepPosition, "PSD map versus position along the cavity axis");
  common(sp);
  grid(sp);
  sp->add_option("--y0-min", y0_min, "first y0 (default 0)");
  sp->add_option("--y0-max", y0_max, "last y0 (default λ_c/2)");
  sp->add_option("--steps", o.steps, "number of rows");
  auto* sim = add(Subcommand::Simulate, "Langevin simulation and Welch PSD");
  common(sim);
  sim->add_option("--series", series, "also write the time series CSV here");
  sim->add_flag("--cavity-noise", o.cavity_noise, "add cavity input noise");
  auto* fit = add(Subcommand::Fit, "fit the PSD model to a spectrum CSV");
  common(fit);
  fit->add_option("-i,--input", input, "PSD CSV (freq_hz,psd_m2_per_hz)")->required();
  fit->add_option("--band-min", band_min, "fit band start, Hz (default Ω_y/2)");
  fit->add_option("--band-max", band_max, "fit band end, Hz (default 2Ω_y)");
  fit->add_option("--rel-amp-x", o.rel_amp_x, "initial x-mode amplitude relative to y (0 = not fitted)");
  fit->add_option("--rel-amp-z", o.rel_amp_z, "initial z-mode amplitude relative to y (0 = not fitted)");
  auto* cf = add(Subcommand::CrossingFit, "fit hybrid branches versus detuning");
  common(cf, false);
  cf->add_option("-i,--input", input, "branch CSV (coord,omega_plus_rad_s,omega_minus_rad_s,confidence)")
      ->required();
  auto* pf = add(Subcommand::PositionFit, "fit |g_y| versus y0");
  common(pf);
  pf->add_option("-i,--input", input, "CSV (y0_m,g_abs_rad_s)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  for (const auto& [sub, s] : subs) {
    if (sub->parsed()) cmd.subcommand = s;
  }
  if (!config.empty()) cmd.config_path = config;
  if (!output.empty()) cmd.output_path = output;
  cmd.overrides = overrides;
  cmd.seed = seed;
  cmd.threads = threads;
  if (!input.empty()) o.input_path = input;
  if (!series.empty()) o.series_path = series;
  if (!std::isnan(band_min)) o.band_min = band_min;
  if (!std::isnan(band_max)) o.band_max = band_max;
  try {
    if (!y0_min.empty()) o.y0_min = parse_quantity(y0_min, Dimension::Length);
    if (!y0_max.empty()) o.y0_max = parse_quantity(y0_max, Dimension::Length);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  return run(cmd, std::cout, std::cerr);
}

}  // namespace cavitas::cli
