#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "osmo/errors.hpp"
#include "osmo/mat.hpp"
#include "osmo/model.hpp"

namespace osmo {

struct LossConfig {
  double lambda = 0.9;       // weight of the alignment term, in [0,1]
  double temperature = 0.1;  // contrastive temperature, > 0

  void validate() const {
    if (lambda < 0.0 || lambda > 1.0) {
      throw ConfigError("lambda must be in [0,1], got " +
                        std::to_string(lambda));
    }
    if (temperature <= 0.0) {
      throw ConfigError("temperature must be > 0, got " +
                        std::to_string(temperature));
    }
  }
};

struct LossValue {
  double value = 0.0;
  Mat d_embeddings;  // gradient w.r.t. the local embeddings only
};

inline void check_aligned(const EmbeddingBatch& e, const EmbeddingBatch& ctx,
                          const char* where) {
  if (e.embeddings.rows != ctx.embeddings.rows ||
      e.embeddings.cols != ctx.embeddings.cols) {
    throw ShapeError(std::string(where) + ": embedding batch is " +
                     std::to_string(e.embeddings.rows) + "x" +
                     std::to_string(e.embeddings.cols) + ", context batch is " +
                     std::to_string(ctx.embeddings.rows) + "x" +
                     std::to_string(ctx.embeddings.cols));
  }
  if (e.indices != ctx.indices) {
    throw ContractError(std::string(where) +
                        ": context indices do not match embedding indices "
                        "for agent " +
                        std::to_string(e.agent_id));
  }
}

// Mean squared distance to the context embedding at the same index. The
// context rows are constants: no gradient flows back through them.
inline LossValue align_loss(const EmbeddingBatch& e,
                            const EmbeddingBatch& ctx) {
  check_aligned(e, ctx, "align_loss");
  const std::size_t B = e.embeddings.rows;
  const std::size_t d = e.embeddings.cols;
  if (B == 0) throw ContractError("align_loss: empty batch");

  LossValue out;
  out.d_embeddings = Mat(B, d);
  const double scale = 1.0 / (static_cast<double>(B) * static_cast<double>(d));
  double acc = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = e.embeddings(i, k) - ctx.embeddings(i, k);
      acc += diff * diff;
      out.d_embeddings(i, k) = 2.0 * diff * scale;
    }
  }
  out.value = acc * scale;
  return out;
}

// Contrastive estimator of how much local structure the embeddings retain.
// Row t is anchored to its temporal neighbor t+1 as the positive pair;
// every other row in the batch is a negative. Similarities are cosine on
// normalized copies, divided by the temperature. Minimizing this keeps
// embeddings from collapsing to a single point.
inline LossValue pres_loss(const EmbeddingBatch& e, double temperature) {
  const std::size_t B = e.embeddings.rows;
  const std::size_t d = e.embeddings.cols;
  if (B < 2) {
    throw ContractError("pres_loss: needs at least 2 rows, got " +
                        std::to_string(B));
  }
  if (temperature <= 0.0) {
    throw ContractError("pres_loss: temperature must be > 0");
  }

  // Normalized copies and their norms.
  Mat unit(B, d);
  Vec norms(B);
  for (std::size_t i = 0; i < B; ++i) {
    const double n = norm2(e.embeddings.row(i));
    if (n == 0.0 || !std::isfinite(n)) {
      throw NumericError("pres_loss: zero-norm embedding at row " +
                         std::to_string(i) + " of agent " +
                         std::to_string(e.agent_id));
    }
    norms[i] = n;
    for (std::size_t k = 0; k < d; ++k) unit(i, k) = e.embeddings(i, k) / n;
  }

  Mat sim(B, B);
  for (std::size_t i = 0; i < B; ++i) {
    sim(i, i) = 0.0;
    for (std::size_t j = i + 1; j < B; ++j) {
      const double s = dot(unit.row(i), unit.row(j)) / temperature;
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }

  const double anchor_count = static_cast<double>(B - 1);
  Mat d_unit(B, d);
  double loss = 0.0;
  Vec softmax(B);
  for (std::size_t t = 0; t + 1 < B; ++t) {
    double row_max = -HUGE_VAL;
    for (std::size_t j = 0; j < B; ++j) {
      if (j != t) row_max = std::max(row_max, sim(t, j));
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < B; ++j) {
      if (j == t) {
        softmax[j] = 0.0;
        continue;
      }
      softmax[j] = std::exp(sim(t, j) - row_max);
      denom += softmax[j];
    }
    loss += -(sim(t, t + 1) - row_max) + std::log(denom);

    for (std::size_t j = 0; j < B; ++j) {
      if (j == t) continue;
      const double w =
          (softmax[j] / denom - (j == t + 1 ? 1.0 : 0.0)) /
          (temperature * anchor_count);
      axpy(w, unit.row(j), d_unit.row(t));
      axpy(w, unit.row(t), d_unit.row(j));
    }
  }

  // Back through the normalization: d_e = (d_u - (u . d_u) u) / ||e||.
  LossValue out;
  out.value = loss / anchor_count;
  out.d_embeddings = Mat(B, d);
  for (std::size_t i = 0; i < B; ++i) {
    const double proj = dot(unit.row(i), d_unit.row(i));
    for (std::size_t k = 0; k < d; ++k) {
      out.d_embeddings(i, k) = (d_unit(i, k) - proj * unit(i, k)) / norms[i];
    }
  }
  return out;
}

// lambda * alignment + (1 - lambda) * preservation.
inline LossValue total_loss(const EmbeddingBatch& e, const EmbeddingBatch& ctx,
                            const LossConfig& cfg) {
  cfg.validate();
  const LossValue align = align_loss(e, ctx);
  const LossValue pres = pres_loss(e, cfg.temperature);

  LossValue out;
  out.value = cfg.lambda * align.value + (1.0 - cfg.lambda) * pres.value;
  out.d_embeddings = Mat(e.embeddings.rows, e.embeddings.cols);
  for (std::size_t i = 0; i < out.d_embeddings.data.size(); ++i) {
    out.d_embeddings.data[i] = cfg.lambda * align.d_embeddings.data[i] +
                               (1.0 - cfg.lambda) * pres.d_embeddings.data[i];
  }
  return out;
}

}  // namespace osmo
