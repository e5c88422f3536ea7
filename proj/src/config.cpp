#include "omegaflow/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "omegaflow/util.hpp"

namespace omegaflow {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // grid and target density
      "geometry", "n_theta", "n_phi", "n_x", "n_y",
      "omega_family", "omega_a", "omega_b", "omega_coeffs",
      // tensor powers
      "k", "k_list",
      // fixed-point iteration
      "tk_max_iterations", "tk_tol",
      // balancing flow
      "flow_t_max", "flow_dt0", "flow_dt_max", "flow_tol", "flow_max_steps",
      "flow_dt_min",
      // parabolic flow
      "pde_t_max", "pde_cfl", "pde_tol", "pde_max_steps",
      // pipeline specifics
      "sample_times", "quant_dt_max", "calabi_endgame", "perturbation_scale",
  };
  return keys;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

long parse_long(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::stringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      throw ConfigError("config key '" + key + "': empty entry in list '" + value + "'");
    }
    parts.push_back(item);
  }
  if (parts.empty()) {
    throw ConfigError("config key '" + key + "': empty list");
  }
  return parts;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
    }
    if (known_keys().count(key) == 0) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (!cfg.kv_.emplace(key, value).second) {
      throw ConfigError("duplicate config key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool ExperimentConfig::has(const std::string& key) const { return kv_.count(key) != 0; }

std::string ExperimentConfig::get_string(const std::string& key,
                                         const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_double(key, it->second);
}

long ExperimentConfig::get_long(const std::string& key, long fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : parse_long(key, it->second);
}

std::vector<double> ExperimentConfig::get_double_list(
    const std::string& key, const std::vector<double>& fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  for (const std::string& part : split_list(key, it->second)) {
    out.push_back(parse_double(key, part));
  }
  return out;
}

std::vector<int> ExperimentConfig::get_int_list(const std::string& key,
                                                const std::vector<int>& fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<int> out;
  for (const std::string& part : split_list(key, it->second)) {
    out.push_back(static_cast<int>(parse_long(key, part)));
  }
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto& [key, value] : kv_) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical()); }

std::shared_ptr<const GeometryBackend> make_geometry(const ExperimentConfig& cfg) {
  const std::string kind = cfg.get_string("geometry", "sphere");
  if (kind == "sphere") {
    return make_sphere_backend(static_cast<int>(cfg.get_long("n_theta", 48)),
                               static_cast<int>(cfg.get_long("n_phi", 64)));
  }
  if (kind == "torus") {
    return make_torus_backend(static_cast<int>(cfg.get_long("n_x", 64)),
                              static_cast<int>(cfg.get_long("n_y", 64)));
  }
  throw ConfigError("config key 'geometry': expected sphere or torus, got '" + kind + "'");
}

DensityField make_omega(const ExperimentConfig& cfg, const GeometryBackend& geom) {
  const std::string family = cfg.get_string("omega_family", "uniform");
  const auto require_kind = [&](GeometryKind kind) {
    if (geom.kind != kind) {
      throw ConfigError("config key 'omega_family': family '" + family +
                        "' does not match the configured geometry");
    }
  };

  Eigen::ArrayXd raw;
  if (family == "uniform") {
    raw = Eigen::ArrayXd::Ones(geom.num_nodes());
  } else if (family == "sphere_cos") {
    require_kind(GeometryKind::Sphere);
    raw = 1.0 + cfg.get_double("omega_a", 0.3) * geom.cos_theta;
  } else if (family == "sphere_exp") {
    require_kind(GeometryKind::Sphere);
    raw = (cfg.get_double("omega_a", 0.3) * geom.cos_theta).exp();
  } else if (family == "torus_exp") {
    require_kind(GeometryKind::Torus);
    raw = (cfg.get_double("omega_a", 0.4) * geom.coord1.sin() +
           cfg.get_double("omega_b", 0.3) * geom.coord2.cos())
              .exp();
  } else if (family == "torus_trig") {
    require_kind(GeometryKind::Torus);
    const std::vector<double> c =
        cfg.get_double_list("omega_coeffs", {0.2, 0.0, 0.15, 0.0, 0.1});
    if (c.size() != 5) {
      throw ConfigError("config key 'omega_coeffs': torus_trig takes exactly 5 coefficients");
    }
    raw = 1.0 + c[0] * geom.coord1.cos() + c[1] * geom.coord1.sin() +
          c[2] * geom.coord2.cos() + c[3] * geom.coord2.sin() +
          c[4] * geom.coord1.cos() * geom.coord2.cos();
  } else {
    throw ConfigError("config key 'omega_family': unknown family '" + family + "'");
  }

  if (!(raw.minCoeff() > 0.0)) {
    throw ConfigError("config key 'omega_family': parameters do not define a positive density");
  }
  DensityField omega{FieldRole::VolumeDensity, raw / (geom.weights * raw).sum()};
  validate_volume_density(geom, omega, "make_omega");
  return omega;
}

}  // namespace omegaflow
