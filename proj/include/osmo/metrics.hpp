#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "osmo/errors.hpp"
#include "osmo/mat.hpp"

namespace osmo {

// Sign-preserving power of cosine similarity: sign(cos) * |cos|^beta.
// beta > 1 amplifies strong alignments and damps weak ones; beta = 1 is
// plain cosine.
inline double modified_similarity(std::span<const double> e_a,
                                  std::span<const double> e_b, double beta) {
  const double na = norm2(e_a);
  const double nb = norm2(e_b);
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("modified_similarity: zero-norm embedding");
  }
  const double c = dot(e_a, e_b) / (na * nb);
  if (c == 0.0) return 0.0;
  const double sign = c > 0.0 ? 1.0 : -1.0;
  return sign * std::pow(std::abs(c), beta);
}

// Cosine affinely rescaled from [-1, 1] to [0, 1]; the accuracy metric's
// similarity (no beta exponent).
inline double cosine01(std::span<const double> e_a,
                       std::span<const double> e_b) {
  const double na = norm2(e_a);
  const double nb = norm2(e_b);
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("cosine01: zero-norm embedding");
  }
  return (dot(e_a, e_b) / (na * nb) + 1.0) * 0.5;
}

// Cross-comparison of two agents' embedding sequences: values[p][q] compares
// a's embedding at position p with b's at position q. A bright main diagonal
// means the agents agree position by position.
struct SimilarityMatrix {
  int agent_a = 0;
  int agent_b = 0;
  double beta = 2.0;
  std::vector<long> indices;  // logical positions of the rows/cols
  Mat values;                 // T x T, entries in [-1, 1]
};

inline SimilarityMatrix similarity_matrix(const Mat& emb_a, const Mat& emb_b,
                                          double beta) {
  if (emb_a.rows != emb_b.rows || emb_a.cols != emb_b.cols) {
    throw ShapeError("similarity_matrix: sequence of " +
                     std::to_string(emb_a.rows) + " embeddings vs " +
                     std::to_string(emb_b.rows));
  }
  SimilarityMatrix out;
  out.beta = beta;
  out.values = Mat(emb_a.rows, emb_a.rows);
  for (std::size_t p = 0; p < emb_a.rows; ++p) {
    for (std::size_t q = 0; q < emb_a.rows; ++q) {
      out.values(p, q) = modified_similarity(emb_a.row(p), emb_b.row(q), beta);
    }
  }
  return out;
}

// Per-group and aggregated evaluation results for one epoch and split.
struct GroupMetric {
  std::vector<int> members;
  std::optional<double> accuracy;  // undefined for singleton groups
  double loss = 0.0;
};

struct MetricRecord {
  long epoch = 0;
  std::string split;                     // "train" or "test"
  std::optional<double> context_accuracy;  // undefined if no group has >= 2
  double context_loss = 0.0;
  std::vector<GroupMetric> groups;
};

// Mean pairwise [0,1]-cosine between group members' embeddings at the same
// position, averaged over qualifying groups. Groups of size 1 have no pairs
// and are excluded; if no group qualifies the metric is undefined.
inline double context_accuracy(const std::map<int, Mat>& embeddings,
                               const std::vector<std::vector<int>>& groups) {
  std::size_t T = 0;
  for (const auto& [id, emb] : embeddings) {
    if (T == 0) {
      T = emb.rows;
    } else if (emb.rows != T) {
      throw ShapeError("context_accuracy: agent " + std::to_string(id) +
                       " evaluated on " + std::to_string(emb.rows) +
                       " positions, expected " + std::to_string(T));
    }
  }

  double sum = 0.0;
  std::size_t qualifying = 0;
  for (const auto& group : groups) {
    if (group.size() < 2) continue;
    const std::size_t n = group.size();
    double acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i + 1 < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          acc += cosine01(embeddings.at(group[i]).row(t),
                          embeddings.at(group[j]).row(t));
        }
      }
    }
    sum += 2.0 * acc /
           (static_cast<double>(n) * static_cast<double>(n - 1) *
            static_cast<double>(T));
    qualifying += 1;
  }
  if (qualifying == 0) {
    throw ContractError(
        "context_accuracy: undefined, no group has two or more agents");
  }
  return sum / static_cast<double>(qualifying);
}

// Mean of the agents' per-position total losses, taken per group and then
// averaged across groups.
inline double context_loss(const std::map<int, Vec>& per_agent_losses,
                           const std::vector<std::vector<int>>& groups) {
  std::size_t T = 0;
  for (const auto& [id, losses] : per_agent_losses) {
    if (T == 0) {
      T = losses.size();
    } else if (losses.size() != T) {
      throw ShapeError("context_loss: agent " + std::to_string(id) + " has " +
                       std::to_string(losses.size()) + " loss values, expected " +
                       std::to_string(T));
    }
  }
  double sum = 0.0;
  for (const auto& group : groups) {
    double acc = 0.0;
    std::size_t count = 0;
    for (int id : group) {
      const Vec& losses = per_agent_losses.at(id);
      for (double l : losses) acc += l;
      count += losses.size();
    }
    if (count == 0) {
      throw ContractError("context_loss: group has no loss values");
    }
    sum += acc / static_cast<double>(count);
  }
  if (groups.empty()) {
    throw ContractError("context_loss: empty partition");
  }
  return sum / static_cast<double>(groups.size());
}

}  // namespace osmo
