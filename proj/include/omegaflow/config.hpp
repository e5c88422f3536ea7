#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "omegaflow/geometry.hpp"
#include "omegaflow/types.hpp"

namespace omegaflow {

// Flat `key = value` experiment description with `#` comments.  Keys are
// validated against the documented schema at parse time; malformed or unknown
// input throws ConfigError naming the offending key.  The canonical
// serialization (sorted keys, one per line) round-trips through parse() and
// is what gets hashed into run manifests.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_long(const std::string& key, long fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  std::string canonical() const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> kv_;
};

// Grid described by the config: geometry = sphere (n_theta, n_phi) or
// torus (n_x, n_y).
std::shared_ptr<const GeometryBackend> make_geometry(const ExperimentConfig& cfg);

// Target volume density described by the config, normalized to unit mass:
//   omega_family = uniform
//                | sphere_cos   1 + a cos(theta)
//                | sphere_exp   exp(a cos(theta))
//                | torus_exp    exp(a sin(x) + b cos(y))
//                | torus_trig   1 + c0 cos x + c1 sin x + c2 cos y
//                               + c3 sin y + c4 cos x cos y
// with a = omega_a, b = omega_b, c = omega_coeffs.
DensityField make_omega(const ExperimentConfig& cfg, const GeometryBackend& geom);

}  // namespace omegaflow
