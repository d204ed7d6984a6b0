#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "osmo/datagen.hpp"
#include "osmo/errors.hpp"
#include "osmo/format.hpp"
#include "osmo/losses.hpp"

namespace osmo {

// Full description of one run. File form is flat `key = value` lines; the
// key set is closed and unknown keys are rejected.
struct RunConfig {
  ContextKind context = ContextKind::simple;
  long epochs = 5;
  double lr = 0.001;
  double lambda = 0.9;
  double temperature = 0.1;
  double beta = 2.0;
  double tau = 0.97;
  std::size_t window = 10;
  std::size_t batch = 50;
  long cluster_period = 2;
  std::size_t cluster_samples = 20;
  std::uint64_t seed = 1;
  std::string out_dir;

  // Not config-file keys: dataset sizes are fixed for the shipped contexts
  // but adjustable programmatically (tests use small series).
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  GeneratorConstants constants;

  ContextSpec context_spec() const {
    return ContextSpec{context, seed, n_train, n_test, constants};
  }
  LossConfig loss_config() const { return LossConfig{lambda, temperature}; }

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (lr <= 0.0) throw ConfigError("lr must be > 0");
    if (lambda < 0.0 || lambda > 1.0)
      throw ConfigError("lambda must be in [0,1]");
    if (temperature <= 0.0) throw ConfigError("temperature must be > 0");
    if (beta < 1.0) throw ConfigError("beta must be >= 1");
    if (tau < -1.0 || tau > 1.0) throw ConfigError("tau must be in [-1,1]");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (batch < 2) throw ConfigError("batch must be >= 2");
    if (cluster_period < 1) throw ConfigError("cluster_period must be >= 1");
    if (cluster_samples < 1) throw ConfigError("cluster_samples must be >= 1");
    if (n_train < window || n_test < window)
      throw ConfigError("window longer than the dataset");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline long parse_long(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long v = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("key '" + key + "': '" + value + "' is not an integer");
  }
  return v;
}

inline std::uint64_t parse_u64(const std::string& key,
                               const std::string& value) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || value.find('-') != std::string::npos) {
    throw ConfigError("key '" + key + "': '" + value +
                      "' is not a non-negative integer");
  }
  return v;
}

inline double parse_real(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0') {
    throw ConfigError("key '" + key + "': '" + value + "' is not a number");
  }
  return v;
}

inline std::size_t parse_count(const std::string& key,
                               const std::string& value) {
  const long v = parse_long(key, value);
  if (v < 0) throw ConfigError("key '" + key + "': must be >= 0");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "context") {
    cfg.context = context_kind_from_string(value);
  } else if (key == "epochs") {
    cfg.epochs = detail::parse_long(key, value);
  } else if (key == "lr") {
    cfg.lr = detail::parse_real(key, value);
  } else if (key == "lambda") {
    cfg.lambda = detail::parse_real(key, value);
  } else if (key == "temperature") {
    cfg.temperature = detail::parse_real(key, value);
  } else if (key == "beta") {
    cfg.beta = detail::parse_real(key, value);
  } else if (key == "tau") {
    cfg.tau = detail::parse_real(key, value);
  } else if (key == "window") {
    cfg.window = detail::parse_count(key, value);
  } else if (key == "batch") {
    cfg.batch = detail::parse_count(key, value);
  } else if (key == "cluster_period") {
    cfg.cluster_period = detail::parse_long(key, value);
  } else if (key == "cluster_samples") {
    cfg.cluster_samples = detail::parse_count(key, value);
  } else if (key == "seed") {
    cfg.seed = detail::parse_u64(key, value);
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

// `key = value` with '#' comments and blank lines.
inline RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  RunConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value, got '" + trimmed + "'");
    }
    apply_config_entry(cfg, detail::trim(trimmed.substr(0, eq)),
                       detail::trim(trimmed.substr(eq + 1)));
  }
  return cfg;
}

// Repeatable `key=value` overrides, applied after the file.
inline void apply_overrides(RunConfig& cfg,
                            const std::vector<std::string>& overrides) {
  for (const std::string& entry : overrides) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + entry + "' is not key=value");
    }
    apply_config_entry(cfg, detail::trim(entry.substr(0, eq)),
                       detail::trim(entry.substr(eq + 1)));
  }
}

}  // namespace osmo
