#include "cavitas/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "cavitas/constants.hpp"
#include "cavitas/errors.hpp"
#include "cavitas/units.hpp"

namespace cavitas {

using nlohmann::json;

double ParticleSpec::mass_from_density(double radius, double density) {
  return 4.0 / 3.0 * std::numbers::pi * radius * radius * radius * density;
}

double TrapSpec::wavenumber() const { return kTwoPi / wavelength; }

double CavitySpec::length() const { return std::numbers::pi * PhysConstants::c / fsr; }
double CavitySpec::linewidth() const { return fsr / finesse; }
double CavitySpec::wavenumber() const { return kTwoPi / wavelength; }
double CavitySpec::resonance() const { return kTwoPi * PhysConstants::c / wavelength; }

double ParticlePosition::phase(double cavity_wavelength) const {
  return kTwoPi * y0 / cavity_wavelength;
}

std::vector<Violation> validate(const ExperimentSpec& spec) {
  std::vector<Violation> out;
  auto positive = [&](double v, const char* field) {
    if (!(v > 0.0) || !std::isfinite(v)) out.push_back({field, "must be > 0"});
  };
  auto non_negative = [&](double v, const char* field) {
    if (!(v >= 0.0) || !std::isfinite(v)) out.push_back({field, "must be ≥ 0"});
  };
  auto finite = [&](double v, const char* field) {
    if (!std::isfinite(v)) out.push_back({field, "must be finite"});
  };

  positive(spec.particle.radius, "radius");
  positive(spec.particle.mass, "mass");
  if (!(spec.particle.refractive_index > 1.0) || !std::isfinite(spec.particle.refractive_index)) {
    out.push_back({"refractive_index", "must be > 1"});
  }

  positive(spec.trap.wavelength, "trap.wavelength");
  positive(spec.trap.power, "power");
  positive(spec.trap.waist_x, "waist_x");
  positive(spec.trap.waist_y, "waist_y");
  if (spec.trap.polarization_angle != 0.0) {
    out.push_back({"polarization_angle", "only θ=0 supported"});
  }
  non_negative(spec.trap.numerical_aperture, "numerical_aperture");

  positive(spec.cavity.wavelength, "cavity.wavelength");
  positive(spec.cavity.finesse, "finesse");
  positive(spec.cavity.fsr, "fsr");
  positive(spec.cavity.waist, "cavity.waist");

  non_negative(spec.env.pressure, "pressure");
  positive(spec.env.temperature, "temperature");
  positive(spec.env.gas_molecular_mass, "gas_molecular_mass");
  non_negative(spec.env.recoil_rate, "recoil_rate");

  finite(spec.position.y0, "y0");
  finite(spec.position.dz, "dz");
  finite(spec.position.dx, "dx");

  positive(spec.modes.omega_x, "omega_x");
  positive(spec.modes.omega_y, "omega_y");
  positive(spec.modes.omega_z, "omega_z");

  finite(spec.detuning, "detuning");
  return out;
}

void require_valid(const ExperimentSpec& spec) {
  const auto v = validate(spec);
  if (!v.empty()) throw ValidationError(v.front().field, v.front().rule);
}

namespace {

// Reads one JSON object section and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) throw ParseError("missing section '" + name_ + "'");
    obj_ = &doc.at(name_);
    if (!obj_->is_object()) throw ParseError("section '" + name_ + "' must be an object");
  }

  bool has(const std::string& key) const { return obj_->contains(key); }

  double get(const std::string& key, Dimension dim) {
    if (!has(key)) throw ParseError("missing key '" + name_ + "." + key + "'");
    return read(key, dim);
  }

  double get_or(const std::string& key, Dimension dim, double fallback) {
    return has(key) ? read(key, dim) : fallback;
  }

  void finish() const {
    for (const auto& [key, _] : obj_->items()) {
      if (key.starts_with('_')) continue;
      if (!used_.contains(key)) throw ParseError("unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  double read(const std::string& key, Dimension dim) {
    used_.insert(key);
    const auto& v = obj_->at(key);
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) return parse_quantity(v.get<std::string>(), dim);
    throw ParseError("key '" + name_ + "." + key + "' must be a number or a quantity string");
  }

  std::string name_;
  const json* obj_ = nullptr;
  std::set<std::string> used_;
};

double read_top(const json& doc, const std::string& key, Dimension dim) {
  if (!doc.contains(key)) throw ParseError("missing key '" + key + "'");
  const auto& v = doc.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_quantity(v.get<std::string>(), dim);
  throw ParseError("key '" + key + "' must be a number or a quantity string");
}

}  // namespace

ExperimentSpec parse_spec(const json& doc) {
  if (!doc.is_object()) throw ParseError("configuration must be a JSON object");
  if (!doc.contains("schema") || !doc.at("schema").is_number_integer() ||
      doc.at("schema").get<int>() != kSchemaVersion) {
    throw ParseError("expected \"schema\": " + std::to_string(kSchemaVersion));
  }
  static const std::set<std::string> kTopKeys = {"schema",      "particle", "trap",
                                                 "cavity",      "environment", "position",
                                                 "modes",       "detuning"};
  for (const auto& [key, _] : doc.items()) {
    if (!key.starts_with('_') && !kTopKeys.contains(key)) throw ParseError("unknown key '" + key + "'");
  }

  ExperimentSpec spec;

  Section particle(doc, "particle");
  if (particle.has("radius") && particle.has("diameter")) {
    throw ValidationError("radius", "give either radius or diameter, not both");
  }
  spec.particle.radius = particle.has("diameter")
                             ? 0.5 * particle.get("diameter", Dimension::Length)
                             : particle.get("radius", Dimension::Length);
  spec.particle.refractive_index = particle.get("refractive_index", Dimension::Dimensionless);
  if (particle.has("mass") && particle.has("density")) {
    throw ValidationError("density", "exactly one of mass, density may be given");
  }
  if (particle.has("mass")) {
    spec.particle.mass = particle.get("mass", Dimension::Mass);
  } else {
    const double rho = particle.get_or("density", Dimension::Density, kSilicaDensity);
    if (!(rho > 0.0)) throw ValidationError("density", "must be > 0");
    spec.particle.mass = ParticleSpec::mass_from_density(spec.particle.radius, rho);
  }
  particle.finish();

  Section trap(doc, "trap");
  spec.trap.wavelength = trap.get("wavelength", Dimension::Length);
  spec.trap.power = trap.get("power", Dimension::Power);
  spec.trap.waist_x = trap.get("waist_x", Dimension::Length);
  spec.trap.waist_y = trap.get("waist_y", Dimension::Length);
  spec.trap.polarization_angle = trap.get_or("polarization_angle", Dimension::Angle, 0.0);
  spec.trap.numerical_aperture = trap.get_or("na", Dimension::Dimensionless, 0.0);
  trap.finish();

  Section cavity(doc, "cavity");
  spec.cavity.wavelength = cavity.get("wavelength", Dimension::Length);
  spec.cavity.finesse = cavity.get("finesse", Dimension::Dimensionless);
  spec.cavity.fsr = cavity.get("fsr", Dimension::AngularFrequency);
  spec.cavity.waist = cavity.get("waist", Dimension::Length);
  cavity.finish();

  Section env(doc, "environment");
  spec.env.pressure = env.get("pressure", Dimension::Pressure);
  spec.env.temperature = env.get("temperature", Dimension::Temperature);
  spec.env.gas_molecular_mass = env.get_or("gas_molecular_mass", Dimension::Mass, kAirMolecularMass);
  spec.env.recoil_rate = env.get_or("recoil_rate", Dimension::AngularFrequency, 0.0);
  env.finish();

  Section pos(doc, "position");
  spec.position.y0 = pos.get("y0", Dimension::Length);
  spec.position.dz = pos.get_or("dz", Dimension::Length, 0.0);
  spec.position.dx = pos.get_or("dx", Dimension::Length, 0.0);
  pos.finish();

  Section modes(doc, "modes");
  spec.modes.omega_x = modes.get("omega_x", Dimension::AngularFrequency);
  spec.modes.omega_y = modes.get("omega_y", Dimension::AngularFrequency);
  spec.modes.omega_z = modes.get("omega_z", Dimension::AngularFrequency);
  modes.finish();

  spec.detuning = read_top(doc, "detuning", Dimension::AngularFrequency);

  require_valid(spec);
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open configuration file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_spec(doc);
}

json to_json(const ExperimentSpec& s) {
  auto q = [](double v, Dimension d) { return format_quantity(v, d); };
  json doc;
  doc["schema"] = kSchemaVersion;
  doc["particle"] = {{"radius", q(s.particle.radius, Dimension::Length)},
                     {"mass", q(s.particle.mass, Dimension::Mass)},
                     {"refractive_index", s.particle.refractive_index}};
  doc["trap"] = {{"wavelength", q(s.trap.wavelength, Dimension::Length)},
                 {"power", q(s.trap.power, Dimension::Power)},
                 {"waist_x", q(s.trap.waist_x, Dimension::Length)},
                 {"waist_y", q(s.trap.waist_y, Dimension::Length)},
                 {"polarization_angle", q(s.trap.polarization_angle, Dimension::Angle)},
                 {"na", s.trap.numerical_aperture}};
  doc["cavity"] = {{"wavelength", q(s.cavity.wavelength, Dimension::Length)},
                   {"finesse", s.cavity.finesse},
                   {"fsr", q(s.cavity.fsr, Dimension::AngularFrequency)},
                   {"waist", q(s.cavity.waist, Dimension::Length)}};
  doc["environment"] = {{"pressure", q(s.env.pressure, Dimension::Pressure)},
                        {"temperature", q(s.env.temperature, Dimension::Temperature)},
                        {"gas_molecular_mass", q(s.env.gas_molecular_mass, Dimension::Mass)},
                        {"recoil_rate", q(s.env.recoil_rate, Dimension::AngularFrequency)}};
  doc["position"] = {{"y0", q(s.position.y0, Dimension::Length)},
                     {"dz", q(s.position.dz, Dimension::Length)},
                     {"dx", q(s.position.dx, Dimension::Length)}};
  doc["modes"] = {{"omega_x", q(s.modes.omega_x, Dimension::AngularFrequency)},
                  {"omega_y", q(s.modes.omega_y, Dimension::AngularFrequency)},
                  {"omega_z", q(s.modes.omega_z, Dimension::AngularFrequency)}};
  doc["detuning"] = q(s.detuning, Dimension::AngularFrequency);
  return doc;
}

std::string serialize(const ExperimentSpec& spec) { return to_json(spec).dump(2) + "\n"; }

std::optional<std::filesystem::path> default_config_path() {
  const char* env = std::getenv("CAVITAS_CONFIG");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return std::filesystem::path(env);
}

}  // namespace cavitas
