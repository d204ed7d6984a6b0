#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "osmo/errors.hpp"
#include "osmo/mat.hpp"
#include "osmo/metrics.hpp"
#include "osmo/model.hpp"

namespace osmo {

// Epoch-stamped grouping of agents into sub-contexts. Groups are disjoint,
// non-empty, and cover every agent; ids inside a group and groups themselves
// are sorted so the partition has one canonical form.
struct SubContextPartition {
  long epoch = 0;
  std::vector<std::vector<int>> groups;
  std::vector<int> agent_ids;  // sorted; row/col order of `provenance`
  Mat provenance;              // pairwise score matrix; empty before the
                               // first reclustering

  bool operator==(const SubContextPartition& other) const {
    return groups == other.groups;
  }
};

inline SubContextPartition single_group_partition(std::vector<int> agent_ids,
                                                  long epoch = 0) {
  std::sort(agent_ids.begin(), agent_ids.end());
  SubContextPartition p;
  p.epoch = epoch;
  p.agent_ids = agent_ids;
  p.groups = {agent_ids};
  return p;
}

// Context embeddings owed to each agent, aligned row-for-row with the
// agent's submitted batch.
using ContextBroadcast = std::map<int, EmbeddingBatch>;

// The point minimizing the summed squared Euclidean distance to the group
// members' embeddings at each index; for that distance the minimizer is the
// arithmetic mean, returned in closed form.
inline Mat osmotic_centroid(const std::vector<const Mat*>& members) {
  if (members.empty()) {
    throw ContractError("osmotic_centroid: empty group");
  }
  const Mat& first = *members.front();
  for (const Mat* m : members) {
    if (m->rows != first.rows || m->cols != first.cols) {
      throw ShapeError("osmotic_centroid: member batch is " +
                       std::to_string(m->rows) + "x" +
                       std::to_string(m->cols) + ", expected " +
                       std::to_string(first.rows) + "x" +
                       std::to_string(first.cols));
    }
  }
  Mat centroid(first.rows, first.cols);
  for (const Mat* m : members) {
    axpy(1.0, m->data, std::span(centroid.data));
  }
  const double inv = 1.0 / static_cast<double>(members.size());
  for (double& v : centroid.data) v *= inv;
  return centroid;
}

// One synchronization step: consumes every agent's batch for the current
// index set and hands each agent its group's context embeddings. Agents in
// singleton groups receive their own embeddings back.
inline ContextBroadcast step_broadcast(
    const std::map<int, EmbeddingBatch>& submissions,
    const SubContextPartition& partition) {
  for (int id : partition.agent_ids) {
    if (!submissions.contains(id)) {
      throw ContractError("step_broadcast: agent " + std::to_string(id) +
                          " has not submitted a batch for this step");
    }
  }
  const auto& reference = submissions.begin()->second;
  for (const auto& [id, batch] : submissions) {
    if (batch.indices != reference.indices) {
      throw ContractError("step_broadcast: agent " + std::to_string(id) +
                          " submitted a batch with mismatched indices");
    }
  }

  ContextBroadcast out;
  for (const auto& group : partition.groups) {
    std::vector<const Mat*> members;
    members.reserve(group.size());
    for (int id : group) members.push_back(&submissions.at(id).embeddings);
    Mat centroid = osmotic_centroid(members);
    for (int id : group) {
      EmbeddingBatch ctx;
      ctx.agent_id = id;
      ctx.embeddings = centroid;
      ctx.indices = submissions.at(id).indices;
      out.emplace(id, std::move(ctx));
    }
  }
  return out;
}

namespace detail {
// Union-find over a handful of agents.
struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};
}  // namespace detail

// Groups agents by thresholding pairwise embedding similarity. Every agent
// contributes sample embeddings drawn at one shared index set; the score of
// a pair is the mean similarity over those indices, and groups are the
// connected components of the graph with an edge wherever score >= tau.
inline SubContextPartition cluster_agents(
    const std::map<int, EmbeddingBatch>& samples, double tau, double beta,
    long epoch) {
  if (samples.empty()) {
    throw ContractError("cluster_agents: no samples");
  }
  const auto& reference = samples.begin()->second;
  if (reference.indices.empty()) {
    throw ContractError("cluster_agents: empty sample set");
  }
  for (const auto& [id, batch] : samples) {
    if (batch.indices != reference.indices) {
      throw ContractError("cluster_agents: agent " + std::to_string(id) +
                          " sampled at different indices");
    }
  }

  std::vector<int> ids;
  ids.reserve(samples.size());
  for (const auto& [id, _] : samples) ids.push_back(id);
  const std::size_t n = ids.size();
  const std::size_t S = reference.indices.size();

  Mat scores(n, n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat& a = samples.at(ids[i]).embeddings;
    for (std::size_t j = i + 1; j < n; ++j) {
      const Mat& b = samples.at(ids[j]).embeddings;
      double acc = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        acc += modified_similarity(a.row(s), b.row(s), beta);
      }
      scores(i, j) = scores(j, i) = acc / static_cast<double>(S);
    }
  }

  detail::DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (scores(i, j) >= tau) sets.unite(i, j);
    }
  }

  std::map<std::size_t, std::vector<int>> components;
  for (std::size_t i = 0; i < n; ++i) components[sets.find(i)].push_back(ids[i]);

  SubContextPartition p;
  p.epoch = epoch;
  p.agent_ids = ids;
  p.provenance = scores;
  for (auto& [_, members] : components) {
    std::sort(members.begin(), members.end());
    p.groups.push_back(std::move(members));
  }
  std::sort(p.groups.begin(), p.groups.end());
  return p;
}

// Reclustering fires on a fixed epoch period; the initial single-context
// partition stands until the first firing.
inline bool partition_schedule(long epoch, long period) {
  if (period < 1) {
    throw ContractError("partition_schedule: period must be >= 1");
  }
  return epoch > 0 && epoch % period == 0;
}

}  // namespace osmo
