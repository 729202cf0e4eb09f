#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vfluct/coefficients.hpp"
#include "vfluct/error.hpp"
#include "vfluct/grid.hpp"
#include "vfluct/stats.hpp"

namespace vfluct {

inline constexpr const char* kVersion = "0.3.0";

/// Settings of the kernel-check subcommand.
struct KernelCheckConfig {
  std::vector<double> hurst = {0.3, 0.5, 0.7, 0.9};
  std::vector<double> mass_times = {0.25, 0.5, 1.0};
  std::vector<std::pair<double, double>> covariance_pairs = {
      {1.0, 1.0}, {1.0, 0.5}, {0.5, 0.5}, {1.0, 0.25}, {0.75, 0.25}, {0.5, 0.25}};
  std::size_t N = 512;
  std::size_t M = 100000;
};

struct ExperimentConfig {
  std::string preset;
  std::vector<double> params;
  std::optional<double> H;
  double x0 = 0.5;  // a generic point: trig curvature vanishes at 0, multiplicative noise too
  double T = 1.0;
  std::size_t N = 256;
  std::size_t M = 10000;
  std::uint64_t seed = 1;
  std::vector<double> epsilons = {0.4, 0.2, 0.1, 0.05};
  std::vector<double> observation_times;  // empty: T/2 and T
  std::vector<std::string> test_functions = {"cos", "tanh"};
  std::string output_dir = "out";
  std::size_t bootstrap_resamples = kBootstrapResamples;
  KernelCheckConfig kernel;

  CoefficientSet coefficients() const { return make_preset(preset, params, H); }
  TimeGrid grid() const { return TimeGrid(T, N); }

  std::vector<double> times() const {
    if (!observation_times.empty()) return observation_times;
    return {0.5 * T, T};
  }

  /// Grid nodes of the observation times; they are validated to be nodes.
  std::vector<std::size_t> nodes() const {
    const TimeGrid g = grid();
    std::vector<std::size_t> out;
    for (double t : times()) out.push_back(g.index_of(t));
    return out;
  }
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

inline double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) config_fail(field, "expected a number");
  return j.get<double>();
}

inline std::size_t get_count(const json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    config_fail(field, "expected a non-negative integer");
  }
  return j.get<std::size_t>();
}

inline std::vector<double> get_numbers(const json& j, const std::string& field) {
  if (!j.is_array()) config_fail(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    out.push_back(get_number(j[k], field + "[" + std::to_string(k) + "]"));
  }
  return out;
}

inline void reject_unknown(const json& j, const std::set<std::string>& known,
                           const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) config_fail(where + key, "unknown key");
  }
}

inline KernelCheckConfig parse_kernel_section(const json& j) {
  if (!j.is_object()) config_fail("kernel", "expected an object");
  reject_unknown(j, {"H_list", "mass_times", "covariance_pairs", "N", "M"}, "kernel.");
  KernelCheckConfig k;
  if (j.contains("H_list")) k.hurst = get_numbers(j["H_list"], "kernel.H_list");
  if (j.contains("mass_times")) k.mass_times = get_numbers(j["mass_times"], "kernel.mass_times");
  if (j.contains("covariance_pairs")) {
    const auto& pairs = j["covariance_pairs"];
    if (!pairs.is_array()) config_fail("kernel.covariance_pairs", "expected an array of [t, s]");
    k.covariance_pairs.clear();
    for (std::size_t n = 0; n < pairs.size(); ++n) {
      const std::string field = "kernel.covariance_pairs[" + std::to_string(n) + "]";
      const auto ts = get_numbers(pairs[n], field);
      if (ts.size() != 2) config_fail(field, "expected [t, s]");
      k.covariance_pairs.push_back({ts[0], ts[1]});
    }
  }
  if (j.contains("N")) k.N = get_count(j["N"], "kernel.N");
  if (j.contains("M")) k.M = get_count(j["M"], "kernel.M");
  return k;
}

inline bool is_node(const TimeGrid& g, double t) {
  const double node = g.node(g.index_of(t));
  return std::abs(node - t) <= 1e-9 * g.horizon();
}

}  // namespace detail

/// Field-level validation; throws ConfigError naming the first bad field.
inline void validate(const ExperimentConfig& c) {
  using detail::config_fail;
  if (c.preset.empty()) config_fail("preset", "required");
  const auto& names = presets::names();
  if (std::find(names.begin(), names.end(), c.preset) == names.end()) {
    config_fail("preset", "unknown preset '" + c.preset + "'");
  }
  const bool fbm = presets::is_fbm_family(c.preset);
  if (fbm && !c.H) config_fail("H", "required for preset '" + c.preset + "'");
  if (!fbm && c.H) config_fail("H", "only allowed for fbm presets");
  if (c.H && !(*c.H > 0.0 && *c.H < 1.0)) config_fail("H", "must lie in (0, 1)");
  if (!(c.T > 0.0) || !std::isfinite(c.T)) config_fail("T", "must be positive");
  if (c.N < 2) config_fail("N", "must be at least 2");
  if (c.N > kDefaultMaxSteps) {
    config_fail("N", "must not exceed " + std::to_string(kDefaultMaxSteps));
  }
  if (c.M < 100) config_fail("M", "must be at least 100");
  if (!std::isfinite(c.x0)) config_fail("x0", "must be finite");
  for (std::size_t k = 0; k < c.epsilons.size(); ++k) {
    const double e = c.epsilons[k];
    if (!(e > 0.0 && e < 1.0)) config_fail("epsilons", "values must lie in (0, 1)");
    if (k > 0 && !(e < c.epsilons[k - 1])) config_fail("epsilons", "must be strictly decreasing");
  }
  if (c.epsilons.empty()) config_fail("epsilons", "must not be empty");
  const TimeGrid g(c.T, c.N);
  for (double t : c.observation_times) {
    if (!(t >= 0.25 * c.T && t <= c.T)) {
      config_fail("observation_times", "times must lie in [T/4, T]");
    }
    if (!detail::is_node(g, t)) config_fail("observation_times", "times must be grid nodes");
  }
  for (const auto& id : c.test_functions) {
    try {
      parse_test_function(id);
    } catch (const DomainError& e) {
      config_fail("test_functions", e.what());
    }
  }
  if (c.bootstrap_resamples == 1) config_fail("bootstrap_resamples", "use 0 or at least 2");
  try {
    c.coefficients();
  } catch (const DomainError& e) {
    config_fail("params", e.what());
  }
  const auto& k = c.kernel;
  for (double H : k.hurst) {
    if (!(H > 0.0 && H < 1.0)) config_fail("kernel.H_list", "values must lie in (0, 1)");
  }
  for (double t : k.mass_times) {
    if (!(t > 0.0 && t <= c.T)) config_fail("kernel.mass_times", "times must lie in (0, T]");
  }
  if (k.N < 2 || k.N > kDefaultMaxSteps) config_fail("kernel.N", "must lie in [2, 4096]");
  if (k.M < 100) config_fail("kernel.M", "must be at least 100");
  const TimeGrid kg(c.T, k.N);
  for (const auto& [t, s] : k.covariance_pairs) {
    if (!(t > 0.0 && t <= c.T && s > 0.0 && s <= t)) {
      config_fail("kernel.covariance_pairs", "need 0 < s <= t <= T");
    }
    if (!detail::is_node(kg, t) || !detail::is_node(kg, s)) {
      config_fail("kernel.covariance_pairs", "times must be nodes of the kernel grid");
    }
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::get_count;
  using detail::get_number;
  using detail::get_numbers;
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  detail::reject_unknown(j,
                         {"preset", "params", "H", "x0", "T", "N", "M", "seed", "epsilons",
                          "observation_times", "test_functions", "output_dir",
                          "bootstrap_resamples", "kernel"},
                         "");
  ExperimentConfig c;
  if (!j.contains("preset") || !j["preset"].is_string()) {
    detail::config_fail("preset", "required string");
  }
  c.preset = j["preset"].get<std::string>();
  if (j.contains("params")) c.params = get_numbers(j["params"], "params");
  if (c.params.empty()) c.params = presets::default_params(c.preset);
  if (j.contains("H")) c.H = get_number(j["H"], "H");
  if (j.contains("x0")) c.x0 = get_number(j["x0"], "x0");
  if (j.contains("T")) c.T = get_number(j["T"], "T");
  if (j.contains("N")) c.N = get_count(j["N"], "N");
  if (j.contains("M")) c.M = get_count(j["M"], "M");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) detail::config_fail("seed", "expected an unsigned integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("epsilons")) c.epsilons = get_numbers(j["epsilons"], "epsilons");
  if (j.contains("observation_times")) {
    c.observation_times = get_numbers(j["observation_times"], "observation_times");
  }
  if (j.contains("test_functions")) {
    const auto& tf = j["test_functions"];
    if (!tf.is_array()) detail::config_fail("test_functions", "expected an array of ids");
    c.test_functions.clear();
    for (const auto& id : tf) {
      if (!id.is_string()) detail::config_fail("test_functions", "expected string ids");
      c.test_functions.push_back(id.get<std::string>());
    }
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) detail::config_fail("output_dir", "expected a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("bootstrap_resamples")) {
    c.bootstrap_resamples = get_count(j["bootstrap_resamples"], "bootstrap_resamples");
  }
  if (j.contains("kernel")) c.kernel = detail::parse_kernel_section(j["kernel"]);
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// The fully resolved config, defaults included; echoed into the manifest.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["preset"] = c.preset;
  j["params"] = c.params;
  if (c.H) j["H"] = *c.H;
  j["x0"] = c.x0;
  j["T"] = c.T;
  j["N"] = c.N;
  j["M"] = c.M;
  j["seed"] = c.seed;
  j["epsilons"] = c.epsilons;
  j["observation_times"] = c.times();
  j["test_functions"] = c.test_functions;
  j["output_dir"] = c.output_dir;
  j["bootstrap_resamples"] = c.bootstrap_resamples;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [t, s] : c.kernel.covariance_pairs) pairs.push_back({t, s});
  j["kernel"] = {{"H_list", c.kernel.hurst},
                 {"mass_times", c.kernel.mass_times},
                 {"covariance_pairs", pairs},
                 {"N", c.kernel.N},
                 {"M", c.kernel.M}};
  return j;
}

}  // namespace vfluct
