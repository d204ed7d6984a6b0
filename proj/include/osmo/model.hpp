#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "osmo/adam.hpp"
#include "osmo/errors.hpp"
#include "osmo/gru.hpp"
#include "osmo/linear.hpp"
#include "osmo/mat.hpp"
#include "osmo/rng.hpp"

namespace osmo {

constexpr std::size_t kHiddenSize = 20;
constexpr std::size_t kEmbeddingDim = 5;

// One agent's encoder: a GRU over the local feature window followed by a
// projection to the shared embedding width. The projection has the same
// structure for every agent but its own weights.
struct AgentModel {
  int agent_id = 0;
  std::size_t n_features = 0;
  GruParams gru;
  LinearParams proj;
  AdamState opt;

  AgentModel() = default;
  AgentModel(int id, std::size_t features, std::size_t hidden = kHiddenSize,
             std::size_t embedding = kEmbeddingDim)
      : agent_id(id),
        n_features(features),
        gru(features, hidden),
        proj(hidden, embedding),
        opt(gru.param_count() + proj.param_count()) {}

  std::size_t hidden_size() const { return gru.hidden_size(); }
  std::size_t embedding_dim() const { return proj.output_size(); }
  std::size_t param_count() const {
    return gru.param_count() + proj.param_count();
  }
};

// Gradients shaped like an AgentModel's weights.
struct ModelGrads {
  GruParams gru;
  LinearParams proj;
};

template <class ModelLike, class F>
void visit_model_blocks(ModelLike& m, F&& f) {
  visit_gru_blocks(m.gru, f);
  visit_linear_blocks(m.proj, f);
}

inline AgentModel make_agent_model(int agent_id, std::size_t n_features,
                                   RngStream& rng,
                                   std::size_t hidden = kHiddenSize,
                                   std::size_t embedding = kEmbeddingDim) {
  AgentModel model(agent_id, n_features, hidden, embedding);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  init_uniform(model.gru, bound, rng);
  init_uniform(model.proj, bound, rng);
  return model;
}

inline Vec flatten_params(const AgentModel& model) {
  Vec flat;
  flat.reserve(model.param_count());
  visit_model_blocks(model, [&](const char*, std::span<const double> block) {
    flat.insert(flat.end(), block.begin(), block.end());
  });
  return flat;
}

inline void unflatten_params(AgentModel& model, std::span<const double> flat) {
  if (flat.size() != model.param_count()) {
    throw ShapeError("unflatten_params: flat vector has " +
                     std::to_string(flat.size()) + " entries, model needs " +
                     std::to_string(model.param_count()));
  }
  std::size_t offset = 0;
  visit_model_blocks(model, [&](const char*, std::span<double> block) {
    for (double& w : block) w = flat[offset++];
  });
}

inline Vec flatten_grads(const ModelGrads& grads) {
  Vec flat;
  visit_gru_blocks(grads.gru, [&](const char*, std::span<const double> block) {
    flat.insert(flat.end(), block.begin(), block.end());
  });
  visit_linear_blocks(grads.proj,
                      [&](const char*, std::span<const double> block) {
                        flat.insert(flat.end(), block.begin(), block.end());
                      });
  return flat;
}

// A contiguous run of sliding windows for one agent, oldest first. Each
// window covers L consecutive steps of the agent's k features;
// start_indices[i] is the logical position of window i's last step.
struct WindowBatch {
  int agent_id = 0;
  std::size_t window_len = 0;
  std::vector<std::vector<Vec>> windows;  // B x L x k
  std::vector<long> start_indices;        // B
};

// Fixed-width embeddings aligned with the source windows.
struct EmbeddingBatch {
  int agent_id = 0;
  Mat embeddings;                   // B x d
  std::vector<long> indices;        // B, equals source start_indices
};

struct EncodeCache {
  const AgentModel* model = nullptr;
  std::vector<GruCache> gru_caches;  // one per window
};

// Maps every window through the GRU from h0 = 0 and projects the final
// hidden state. Windows are independent: no state is carried across them.
inline EmbeddingBatch encode(const AgentModel& model, const WindowBatch& batch,
                             EncodeCache* cache = nullptr) {
  if (batch.agent_id != model.agent_id) {
    throw ContractError("encode: batch for agent " +
                        std::to_string(batch.agent_id) +
                        " given to model of agent " +
                        std::to_string(model.agent_id));
  }
  for (const auto& window : batch.windows) {
    for (const Vec& step : window) {
      if (step.size() != model.n_features) {
        throw ShapeError("encode: window step has width " +
                         std::to_string(step.size()) + ", agent " +
                         std::to_string(model.agent_id) + " expects " +
                         std::to_string(model.n_features));
      }
    }
  }

  const std::size_t B = batch.windows.size();
  EmbeddingBatch out;
  out.agent_id = model.agent_id;
  out.embeddings = Mat(B, model.embedding_dim());
  out.indices = batch.start_indices;
  if (cache != nullptr) {
    cache->model = &model;
    cache->gru_caches.clear();
    cache->gru_caches.reserve(B);
  }

  const Vec h0(model.hidden_size(), 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    GruCache gc = gru_forward(batch.windows[i], h0, model.gru);
    linear_forward(gc.h.back(), model.proj, out.embeddings.row(i));
    if (cache != nullptr) cache->gru_caches.push_back(std::move(gc));
  }
  return out;
}

// Exact gradients of the batch scalar whose per-embedding cotangents are
// d_embeddings, summed over all windows.
inline ModelGrads encode_backward(const AgentModel& model,
                                  const EncodeCache& cache,
                                  const Mat& d_embeddings) {
  if (cache.model != &model) {
    throw ContractError("encode_backward: cache does not belong to agent " +
                        std::to_string(model.agent_id));
  }
  if (d_embeddings.rows != cache.gru_caches.size() ||
      d_embeddings.cols != model.embedding_dim()) {
    throw ShapeError("encode_backward: d_embeddings is " +
                     std::to_string(d_embeddings.rows) + "x" +
                     std::to_string(d_embeddings.cols) + ", cache holds " +
                     std::to_string(cache.gru_caches.size()) + " windows of " +
                     std::to_string(model.embedding_dim()));
  }

  ModelGrads grads;
  grads.gru = GruParams(model.n_features, model.hidden_size());
  grads.proj = LinearParams(model.hidden_size(), model.embedding_dim());

  for (std::size_t i = 0; i < cache.gru_caches.size(); ++i) {
    const GruCache& gc = cache.gru_caches[i];
    LinearCache lc;
    lc.params = &model.proj;
    lc.input = gc.h.back();
    LinearGrads lg = linear_backward(lc, d_embeddings.row(i));
    GruGrads gg = gru_backward(gc, lg.d_input);

    accumulate(grads.gru, gg.d_params);
    axpy(1.0, lg.d_params.weight.data, std::span(grads.proj.weight.data));
    axpy(1.0, lg.d_params.bias, grads.proj.bias);
  }
  return grads;
}

// One Adam step over all parameter blocks; the optimizer state advances
// exactly once.
inline void apply_update(AgentModel& model, const ModelGrads& grads,
                         const AdamConfig& cfg) {
  visit_gru_blocks(grads.gru,
                   [&](const char* name, std::span<const double> block) {
                     require_finite(block, std::string("gru.") + name +
                                               " gradient of agent " +
                                               std::to_string(model.agent_id));
                   });
  visit_linear_blocks(
      grads.proj, [&](const char* name, std::span<const double> block) {
        require_finite(block, std::string("proj.") + name +
                                  " gradient of agent " +
                                  std::to_string(model.agent_id));
      });

  Vec flat_params = flatten_params(model);
  const Vec flat_grads = flatten_grads(grads);
  adam_step(flat_params, flat_grads, model.opt, cfg,
            "agent " + std::to_string(model.agent_id));
  unflatten_params(model, flat_params);
}

}  // namespace osmo
