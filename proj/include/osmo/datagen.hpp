#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "osmo/errors.hpp"
#include "osmo/mat.hpp"
#include "osmo/model.hpp"
#include "osmo/rng.hpp"

namespace osmo {

// Every structural constant of the synthetic generators in one place, so a
// context can be re-tuned without touching generator code.
struct GeneratorConstants {
  long base_period = 100;      // ramp 25% / plateau 50% / ramp 25%
  double jitter_sigma = 0.02;  // i.i.d. Gaussian jitter on every sample
  double osc_amplitude = 0.3;  // Agent_0 plateau oscillation
  long osc_period = 10;
  double offset_agent0 = 2.0;  // complex-context offsets
  double offset_agent1 = 4.0;
  long second_period = 80;     // second signal family, same ramp shape
  double partial_scale = 0.5;  // Agent_4 second feature
  double sine_amplitude = 0.4;
  long sine_period = 20;
  long discretize_levels = 10;  // Agent_4 first feature, values 0..levels
};

enum class ContextKind { simple, simple_misleading, complex };

inline std::string to_string(ContextKind kind) {
  switch (kind) {
    case ContextKind::simple: return "simple";
    case ContextKind::simple_misleading: return "simple+misleading";
    case ContextKind::complex: return "complex";
  }
  return "?";
}

inline ContextKind context_kind_from_string(const std::string& name) {
  if (name == "simple") return ContextKind::simple;
  if (name == "simple+misleading") return ContextKind::simple_misleading;
  if (name == "complex") return ContextKind::complex;
  throw ConfigError("unknown context '" + name +
                    "' (expected simple, simple+misleading or complex)");
}

// A context name and seed fully determine every generated series.
struct ContextSpec {
  ContextKind kind = ContextKind::simple;
  std::uint64_t seed = 0;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  GeneratorConstants constants;
};

// One agent's local multivariate series for one split; all features share
// the implicit timestamps 0..N-1.
struct AgentDataset {
  int agent_id = 0;
  std::string split;          // "train" or "test"
  std::vector<Vec> features;  // k series of N values each

  std::size_t n_features() const { return features.size(); }
  std::size_t length() const {
    return features.empty() ? 0 : features.front().size();
  }
};

// All agents, both splits, aligned on shared timestamps.
struct ContextData {
  std::vector<AgentDataset> train;  // ordered by agent id
  std::vector<AgentDataset> test;
};

namespace detail {

// Piecewise base pattern: quarter-period linear ramp up, half-period
// plateau at 1, quarter-period ramp down.
inline double ramp_plateau(long t, long period) {
  const long q = period / 4;
  const long p = t % period;
  if (p < q) return static_cast<double>(p) / static_cast<double>(q);
  if (p < 3 * q) return 1.0;
  return static_cast<double>(period - p) / static_cast<double>(q);
}

inline bool on_plateau(long t, long period) {
  const long q = period / 4;
  const long p = t % period;
  return p >= q && p < 3 * q;
}

// Substream tag for one (generator family, agent, feature, split) cell so
// no two series ever share a jitter stream.
inline std::uint64_t series_tag(std::uint64_t family, int agent,
                                std::size_t feature, bool test_split) {
  return (family << 32) | (static_cast<std::uint64_t>(agent) << 8) |
         (feature << 1) | (test_split ? 1 : 0);
}

constexpr std::uint64_t kSimpleFamily = 1;
constexpr std::uint64_t kMisleadingFamily = 2;
constexpr std::uint64_t kComplexFamily = 3;

}  // namespace detail

// Two agents with one feature each, positively synchronized. Agent_1 carries
// the base pattern; Agent_0 mirrors it but oscillates during the plateau
// phases, which at context level are still stationary. The test split
// continues the signal phase where the train split left off; only the
// jitter streams are disjoint.
inline ContextData gen_simple(std::uint64_t seed, std::size_t n_train,
                              std::size_t n_test,
                              const GeneratorConstants& c = {}) {
  RngStream root(seed);
  ContextData out;
  for (int split = 0; split < 2; ++split) {
    const bool is_test = split == 1;
    const std::size_t n = is_test ? n_test : n_train;
    const long phase0 = is_test ? static_cast<long>(n_train) : 0;

    AgentDataset a0{0, is_test ? "test" : "train", {Vec(n)}};
    AgentDataset a1{1, is_test ? "test" : "train", {Vec(n)}};
    RngStream j0 = root.substream(
        detail::series_tag(detail::kSimpleFamily, 0, 0, is_test));
    RngStream j1 = root.substream(
        detail::series_tag(detail::kSimpleFamily, 1, 0, is_test));

    for (std::size_t t = 0; t < n; ++t) {
      const long abs_t = phase0 + static_cast<long>(t);
      const double base = detail::ramp_plateau(abs_t, c.base_period);
      double osc = 0.0;
      if (detail::on_plateau(abs_t, c.base_period)) {
        osc = c.osc_amplitude *
              std::sin(2.0 * std::numbers::pi * static_cast<double>(abs_t) /
                       static_cast<double>(c.osc_period));
      }
      a0.features[0][t] = base + osc + j0.normal(0.0, c.jitter_sigma);
      a1.features[0][t] = base + j1.normal(0.0, c.jitter_sigma);
    }
    auto& bucket = is_test ? out.test : out.train;
    bucket.push_back(std::move(a0));
    bucket.push_back(std::move(a1));
  }
  return out;
}

// `count` agents of pure i.i.d. standard Gaussian noise, carrying no context
// at all. Agent ids start at `first_id`.
inline ContextData gen_misleading(std::uint64_t seed, std::size_t count,
                                  std::size_t n_train, std::size_t n_test,
                                  int first_id = 0,
                                  const GeneratorConstants& c = {}) {
  (void)c;
  RngStream root(seed);
  ContextData out;
  for (int split = 0; split < 2; ++split) {
    const bool is_test = split == 1;
    const std::size_t n = is_test ? n_test : n_train;
    for (std::size_t a = 0; a < count; ++a) {
      const int id = first_id + static_cast<int>(a);
      AgentDataset ds{id, is_test ? "test" : "train", {Vec(n)}};
      RngStream j = root.substream(
          detail::series_tag(detail::kMisleadingFamily, id, 0, is_test));
      for (std::size_t t = 0; t < n; ++t) ds.features[0][t] = j.normal();
      (is_test ? out.test : out.train).push_back(std::move(ds));
    }
  }
  return out;
}

// Five agents in two latent groups. Agents 0/1 repeat the simple context
// shifted by constant offsets. Agents 2/3/4 follow a second base pattern
// with its own period: agent 3 inverts it, and agent 4 sees it only through
// a discretized copy and a partially correlated sinusoidal mix.
inline ContextData gen_complex(std::uint64_t seed, std::size_t n_train,
                               std::size_t n_test,
                               const GeneratorConstants& c = {}) {
  ContextData out = gen_simple(seed, n_train, n_test, c);
  for (auto* bucket : {&out.train, &out.test}) {
    for (Vec& v : (*bucket)[0].features)
      for (double& x : v) x += c.offset_agent0;
    for (Vec& v : (*bucket)[1].features)
      for (double& x : v) x += c.offset_agent1;
  }

  RngStream root(seed);
  for (int split = 0; split < 2; ++split) {
    const bool is_test = split == 1;
    const std::size_t n = is_test ? n_test : n_train;
    const long phase0 = is_test ? static_cast<long>(n_train) : 0;

    AgentDataset a2{2, is_test ? "test" : "train", {Vec(n)}};
    AgentDataset a3{3, is_test ? "test" : "train", {Vec(n)}};
    AgentDataset a4{4, is_test ? "test" : "train", {Vec(n), Vec(n)}};
    RngStream j2 = root.substream(
        detail::series_tag(detail::kComplexFamily, 2, 0, is_test));
    RngStream j3 = root.substream(
        detail::series_tag(detail::kComplexFamily, 3, 0, is_test));
    RngStream j4a = root.substream(
        detail::series_tag(detail::kComplexFamily, 4, 0, is_test));
    RngStream j4b = root.substream(
        detail::series_tag(detail::kComplexFamily, 4, 1, is_test));

    for (std::size_t t = 0; t < n; ++t) {
      const long abs_t = phase0 + static_cast<long>(t);
      const double base = detail::ramp_plateau(abs_t, c.second_period);

      a2.features[0][t] = base + j2.normal(0.0, c.jitter_sigma);
      a3.features[0][t] = 1.0 - (base + j3.normal(0.0, c.jitter_sigma));

      const double s4a = base + j4a.normal(0.0, c.jitter_sigma);
      const double levels = static_cast<double>(c.discretize_levels);
      a4.features[0][t] = std::round(levels * std::clamp(s4a, 0.0, 1.0));

      const double s4b = base + j4b.normal(0.0, c.jitter_sigma);
      a4.features[1][t] =
          c.partial_scale * s4b +
          c.sine_amplitude *
              std::sin(2.0 * std::numbers::pi * static_cast<double>(abs_t) /
                       static_cast<double>(c.sine_period));
    }
    auto& bucket = is_test ? out.test : out.train;
    bucket.push_back(std::move(a2));
    bucket.push_back(std::move(a3));
    bucket.push_back(std::move(a4));
  }
  return out;
}

inline ContextData make_context(const ContextSpec& spec) {
  switch (spec.kind) {
    case ContextKind::simple:
      return gen_simple(spec.seed, spec.n_train, spec.n_test, spec.constants);
    case ContextKind::simple_misleading: {
      ContextData out =
          gen_simple(spec.seed, spec.n_train, spec.n_test, spec.constants);
      ContextData noise = gen_misleading(spec.seed, 2, spec.n_train,
                                         spec.n_test, 2, spec.constants);
      for (auto& ds : noise.train) out.train.push_back(std::move(ds));
      for (auto& ds : noise.test) out.test.push_back(std::move(ds));
      return out;
    }
    case ContextKind::complex:
      return gen_complex(spec.seed, spec.n_train, spec.n_test, spec.constants);
  }
  throw ConfigError("unknown context kind");
}

// Splits a series into all length-L windows at stride 1, oldest first, and
// groups them into consecutive batches of `batch_size` (the final batch may
// be short). Never shuffles.
inline std::vector<WindowBatch> sliding_windows(const AgentDataset& dataset,
                                                std::size_t window_len,
                                                std::size_t batch_size) {
  const std::size_t n = dataset.length();
  if (window_len < 1 || batch_size < 1) {
    throw ContractError("sliding_windows: window and batch must be >= 1");
  }
  if (n < window_len) {
    throw ContractError("sliding_windows: series of length " +
                        std::to_string(n) + " is shorter than window " +
                        std::to_string(window_len));
  }
  const std::size_t k = dataset.n_features();
  const std::size_t total = n - window_len + 1;

  std::vector<WindowBatch> batches;
  batches.reserve((total + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < total; start += batch_size) {
    const std::size_t b = std::min(batch_size, total - start);
    WindowBatch batch;
    batch.agent_id = dataset.agent_id;
    batch.window_len = window_len;
    batch.windows.reserve(b);
    batch.start_indices.reserve(b);
    for (std::size_t w = 0; w < b; ++w) {
      const std::size_t last = start + w + window_len - 1;
      std::vector<Vec> window(window_len, Vec(k));
      for (std::size_t s = 0; s < window_len; ++s) {
        for (std::size_t f = 0; f < k; ++f) {
          window[s][f] = dataset.features[f][last - window_len + 1 + s];
        }
      }
      batch.windows.push_back(std::move(window));
      batch.start_indices.push_back(static_cast<long>(last));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

// A single WindowBatch holding the windows at the given positions, in the
// given order. Positions index the window's last step.
inline WindowBatch windows_at(const AgentDataset& dataset,
                              std::size_t window_len,
                              const std::vector<long>& positions) {
  const std::size_t n = dataset.length();
  const std::size_t k = dataset.n_features();
  WindowBatch batch;
  batch.agent_id = dataset.agent_id;
  batch.window_len = window_len;
  for (long pos : positions) {
    if (pos < static_cast<long>(window_len) - 1 ||
        pos >= static_cast<long>(n)) {
      throw ContractError("windows_at: position " + std::to_string(pos) +
                          " out of range for series of length " +
                          std::to_string(n));
    }
    std::vector<Vec> window(window_len, Vec(k));
    for (std::size_t s = 0; s < window_len; ++s) {
      for (std::size_t f = 0; f < k; ++f) {
        window[s][f] =
            dataset.features[f][static_cast<std::size_t>(pos) - window_len +
                                1 + s];
      }
    }
    batch.windows.push_back(std::move(window));
    batch.start_indices.push_back(pos);
  }
  return batch;
}

}  // namespace osmo
