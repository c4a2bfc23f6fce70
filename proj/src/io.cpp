#include "cavitas/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include "cavitas/constants.hpp"
#include "cavitas/errors.hpp"
#include "cavitas/units.hpp"

namespace cavitas::io {

using nlohmann::json;

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

// Hz columns: 15 significant digits hide the rad/s -> Hz rounding noise.
std::string format_hz(double omega) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", rad_to_hz(omega));
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double cell_value(const std::string& cell, std::size_t line_no) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": not a number '" + cell + "'");
  }
}

// Yields data rows (after the header), skipping comments and blank lines.
template <class Row>
void for_each_row(const std::string& text, std::size_t min_cols, Row&& row,
                  std::map<std::string, std::string>* meta = nullptr) {
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (meta && eq != std::string::npos) {
        auto key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        (*meta)[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() < min_cols) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(min_cols) + " columns");
    }
    std::vector<double> vals;
    for (const auto& c : cells) vals.push_back(cell_value(c, line_no));
    row(vals, line_no);
  }
  if (!header) throw ParseError("missing CSV header");
}

}  // namespace

std::string psd_to_csv(const PsdSeries& psd) {
  std::ostringstream os;
  os << "# n_avg=" << psd.n_avg << "\n";
  for (const auto& [k, v] : psd.meta) os << "# " << k << "=" << v << "\n";
  os << "freq_hz,psd_m2_per_hz\n";
  for (std::size_t i = 0; i < psd.size(); ++i) {
    os << format_hz(psd.freqs[i]) << "," << format_double(psd.values[i]) << "\n";
  }
  return os.str();
}

PsdSeries psd_from_csv(const std::string& text) {
  PsdSeries psd;
  std::map<std::string, std::string> meta;
  for_each_row(
      text, 2,
      [&](const std::vector<double>& v, std::size_t line_no) {
        if (!std::isfinite(v[0]) || !std::isfinite(v[1])) {
          throw ParseError("line " + std::to_string(line_no) + ": missing value");
        }
        psd.freqs.push_back(hz_to_rad(v[0]));
        psd.values.push_back(v[1]);
      },
      &meta);
  if (auto it = meta.find("n_avg"); it != meta.end()) {
    psd.n_avg = std::stoi(it->second);
    meta.erase(it);
  }
  psd.meta = std::move(meta);
  psd.check();
  return psd;
}

std::string series_to_csv(const TimeSeries& series) {
  std::ostringstream os;
  os << "t_s,q_m\n";
  for (std::size_t i = 0; i < series.q.size(); ++i) {
    os << format_double(series.time(i)) << "," << format_double(series.q[i]) << "\n";
  }
  return os.str();
}

std::string map_to_csv(const SpectrumMap& map) {
  std::ostringstream os;
  os << map.coord_name;
  for (double w : map.freqs) os << "," << format_hz(w);
  os << "\n";
  for (std::size_t r = 0; r < map.rows.size(); ++r) {
    os << format_double(map.coords[r]);
    for (double v : map.rows[r]) os << "," << format_double(v);
    os << "\n";
  }
  return os.str();
}

std::string track_to_csv(const BranchTrack& t) {
  std::ostringstream os;
  os << "coord,omega_plus_rad_s,omega_minus_rad_s,confidence\n";
  auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << format_double(t.coords[i]) << "," << cell(t.omega_plus[i]) << ","
       << cell(t.omega_minus[i]) << "," << (t.confidence.empty() ? "1" : cell(t.confidence[i]))
       << "\n";
  }
  return os.str();
}

BranchTrack track_from_csv(const std::string& text) {
  BranchTrack t;
  for_each_row(text, 3, [&](const std::vector<double>& v, std::size_t line_no) {
    if (!std::isfinite(v[0])) throw ParseError("line " + std::to_string(line_no) + ": missing coordinate");
    t.coords.push_back(v[0]);
    t.omega_plus.push_back(v[1]);
    t.omega_minus.push_back(v[2]);
    t.confidence.push_back(v.size() > 3 && std::isfinite(v[3]) ? v[3] : 1.0);
  });
  return t;
}

std::pair<std::vector<double>, std::vector<double>> position_track_from_csv(const std::string& text) {
  std::vector<double> y0, g;
  for_each_row(text, 2, [&](const std::vector<double>& v, std::size_t line_no) {
    if (!std::isfinite(v[0]) || !std::isfinite(v[1])) {
      throw ParseError("line " + std::to_string(line_no) + ": missing value");
    }
    y0.push_back(v[0]);
    g.push_back(v[1]);
  });
  return {y0, g};
}

namespace {

bool is_frequency(std::string_view name) {
  return name.starts_with("omega") || name == "gamma_m" || name == "g_y" || name == "kappa" ||
         name == "detuning";
}

}  // namespace

json to_json(const FitResult& fit) {
  json j;
  const auto p = fit.params.to_array();
  const auto e = fit.standard_error.to_array();
  const auto& names = SpectrumModelParams::names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string n(names[i]);
    json entry = {{"value", p[i]}, {"stderr", e[i]}, {"free", fit.free.free[i]}};
    if (fit.at_lower_bound[i]) entry["at_lower_bound"] = true;
    if (is_frequency(n)) {
      entry["value_hz"] = rad_to_hz(p[i]);
      entry["stderr_hz"] = rad_to_hz(e[i]);
    }
    j["params"][n] = entry;
  }
  j["chi2_reduced"] = fit.chi2_reduced;
  j["cost"] = fit.cost;
  j["n_iter"] = fit.n_iter;
  j["n_bins"] = fit.n_bins;
  j["converged"] = fit.converged;
  return j;
}

json to_json(const coupling::DerivedParams& d) {
  return {
      {"alpha_C_m2_per_V", d.alpha},
      {"E0_V_per_m", d.E0},
      {"Vc_m3", d.Vc},
      {"Lc_m", d.Lc},
      {"G_perp_rad_s", d.G_perp},
      {"kappa_rad_s", d.kappa},
      {"kappa_hz", rad_to_hz(d.kappa)},
      {"x_zpf_m", d.x_zpf},
      {"y_zpf_m", d.y_zpf},
      {"z_zpf_m", d.z_zpf},
      {"g_y_rad_s", d.g_y},
      {"g_y_hz", rad_to_hz(d.g_y)},
      {"g_y_max_rad_s", d.g_y_max},
      {"g_z_mag_rad_s", d.g_z_mag},
      {"g_z_quadrature", "phase"},
      {"g_dr_single_rad_s", d.g_dr_single},
      {"Gamma_m_rad_s", d.Gamma_m},
      {"Gamma_m_hz", rad_to_hz(d.Gamma_m)},
      {"n_th", d.n_th},
      {"phi_rad", d.phi},
      {"envelope", d.envelope},
  };
}

namespace {

json estimate_json(const CrossingEstimate& e) {
  static const char* kUse[] = {"both", "upper", "lower"};
  return {{"g_rad_s", e.g},
          {"g_hz", rad_to_hz(e.g)},
          {"omega_m_rad_s", e.omega_m},
          {"omega_m_hz", rad_to_hz(e.omega_m)},
          {"stderr_g_rad_s", e.stderr_g},
          {"stderr_omega_m_rad_s", e.stderr_omega_m},
          {"chi2_reduced", e.chi2_reduced},
          {"branches", kUse[static_cast<int>(e.used)]}};
}

}  // namespace

json to_json(const AvoidedCrossingFit& fit) {
  json j = {{"joint", fit.joint}, {"best", estimate_json(fit.best)}};
  j["upper_only"] = fit.upper ? estimate_json(*fit.upper) : json(nullptr);
  j["lower_only"] = fit.lower ? estimate_json(*fit.lower) : json(nullptr);
  return j;
}

json to_json(const SinusoidFit& fit) {
  return {{"g_max_rad_s", fit.g_max},
          {"g_max_hz", rad_to_hz(fit.g_max)},
          {"stderr_g_rad_s", fit.stderr_g},
          {"stderr_g_hz", rad_to_hz(fit.stderr_g)},
          {"y_offset_m", fit.y_offset},
          {"stderr_offset_m", fit.stderr_offset},
          {"band_3sigma_rad_s", {fit.band_lo, fit.band_hi}},
          {"chi2_reduced", fit.chi2_reduced}};
}

}  // namespace cavitas::io
