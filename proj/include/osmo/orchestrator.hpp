#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmo/checkpoint.hpp"
#include "osmo/config.hpp"
#include "osmo/datagen.hpp"
#include "osmo/dataset_io.hpp"
#include "osmo/diffuser.hpp"
#include "osmo/errors.hpp"
#include "osmo/losses.hpp"
#include "osmo/metrics.hpp"
#include "osmo/metrics_io.hpp"
#include "osmo/model.hpp"

namespace osmo {

// Everything one training run leaves behind.
struct RunArtifacts {
  std::vector<MetricRecord> metrics;  // epoch 0 baseline, then one pair of
                                      // train/test records per epoch
  std::vector<SubContextPartition> cluster_events;
  SubContextPartition final_partition;
  std::map<int, AgentModel> models;
  std::filesystem::path out_dir;  // empty when nothing was written
  double wall_seconds = 0.0;
};

using ProgressFn = std::function<void(const std::string&)>;

namespace detail {

constexpr std::uint64_t kModelInitTag = 0xA0000000ULL;
constexpr std::uint64_t kDiffuserTag = 0xD1F0000ULL;
constexpr std::size_t kSimilarityExportCap = 200;

struct AgentRuntime {
  const AgentDataset* train = nullptr;
  const AgentDataset* test = nullptr;
  std::vector<WindowBatch> train_batches;
  std::vector<WindowBatch> test_batches;
};

}  // namespace detail

// Forward-only pass over one split: per-agent embeddings over every window
// position plus per-position total losses against the active partition's
// context embeddings. No parameters change.
inline MetricRecord evaluate(const std::map<int, AgentModel>& models,
                             const std::map<int, std::vector<WindowBatch>>& batches,
                             const SubContextPartition& partition,
                             const RunConfig& config, long epoch,
                             const std::string& split) {
  const LossConfig loss_cfg = config.loss_config();

  std::map<int, Mat> all_embeddings;
  std::map<int, Vec> all_losses;
  std::map<int, std::vector<EmbeddingBatch>> per_batch;

  for (const auto& [id, model] : models) {
    const auto& agent_batches = batches.at(id);
    std::size_t total = 0;
    for (const auto& b : agent_batches) total += b.windows.size();
    all_embeddings.emplace(id, Mat(total, model.embedding_dim()));
    all_losses.emplace(id, Vec());
    all_losses.at(id).reserve(total);

    std::size_t row = 0;
    auto& encoded = per_batch[id];
    for (const auto& batch : agent_batches) {
      EmbeddingBatch emb = encode(model, batch);
      for (std::size_t i = 0; i < emb.embeddings.rows; ++i) {
        std::copy(emb.embeddings.row(i).begin(), emb.embeddings.row(i).end(),
                  all_embeddings.at(id).row(row++).begin());
      }
      encoded.push_back(std::move(emb));
    }
  }

  const std::size_t n_batches =
      per_batch.empty() ? 0 : per_batch.begin()->second.size();
  for (std::size_t m = 0; m < n_batches; ++m) {
    std::map<int, EmbeddingBatch> submissions;
    for (const auto& [id, encoded] : per_batch) {
      submissions.emplace(id, encoded[m]);
    }
    ContextBroadcast broadcast = step_broadcast(submissions, partition);
    for (const auto& [id, emb] : submissions) {
      const LossValue lv = total_loss(emb, broadcast.at(id), loss_cfg);
      // Batch losses are means over their rows; spreading the mean over the
      // rows keeps the per-position vector consistent with that weighting.
      for (std::size_t i = 0; i < emb.embeddings.rows; ++i) {
        all_losses.at(id).push_back(lv.value);
      }
    }
  }

  MetricRecord rec;
  rec.epoch = epoch;
  rec.split = split;
  for (const auto& group : partition.groups) {
    GroupMetric gm;
    gm.members = group;
    std::map<int, Mat> group_emb;
    std::map<int, Vec> group_losses;
    for (int id : group) {
      group_emb.emplace(id, all_embeddings.at(id));
      group_losses.emplace(id, all_losses.at(id));
    }
    if (group.size() >= 2) {
      gm.accuracy = context_accuracy(group_emb, {group});
    }
    gm.loss = context_loss(group_losses, {group});
    rec.groups.push_back(std::move(gm));
  }
  try {
    rec.context_accuracy = context_accuracy(all_embeddings, partition.groups);
  } catch (const ContractError&) {
    rec.context_accuracy.reset();  // all-singleton partition: flagged as nan
  }
  rec.context_loss = context_loss(all_losses, partition.groups);
  return rec;
}

namespace detail {

inline void write_run_files(const RunConfig& config, const RunArtifacts& art,
                            const std::map<int, Mat>& final_test_embeddings,
                            const std::vector<long>& test_positions) {
  const std::filesystem::path out = config.out_dir;
  write_metrics_csv(art.metrics, out / "metrics.csv");

  {
    std::ofstream jsonl = open_for_write(out / "clusters.jsonl");
    for (const SubContextPartition& p : art.cluster_events) {
      nlohmann::json rec;
      rec["epoch"] = p.epoch;
      rec["groups"] = p.groups;
      rec["agent_ids"] = p.agent_ids;
      nlohmann::json scores = nlohmann::json::array();
      for (std::size_t i = 0; i < p.provenance.rows; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < p.provenance.cols; ++j) {
          row.push_back(p.provenance(i, j));
        }
        scores.push_back(std::move(row));
      }
      rec["scores"] = std::move(scores);
      jsonl << rec.dump() << "\n";
    }
    if (!jsonl) throw IoError("failed writing clusters.jsonl");
  }

  save_all_checkpoints(art.models, out / "checkpoints");

  // Cross-agent similarity matrices over the test split, capped to the
  // first kSimilarityExportCap positions; exported with the run's beta and
  // again with beta=1 (plain cosine).
  const std::size_t cap = kSimilarityExportCap;
  for (auto a = final_test_embeddings.begin(); a != final_test_embeddings.end();
       ++a) {
    for (auto b = a; b != final_test_embeddings.end(); ++b) {
      const std::size_t T = std::min(cap, a->second.rows);
      Mat emb_a(T, a->second.cols);
      Mat emb_b(T, b->second.cols);
      std::copy_n(a->second.data.begin(), T * a->second.cols,
                  emb_a.data.begin());
      std::copy_n(b->second.data.begin(), T * b->second.cols,
                  emb_b.data.begin());
      for (double beta : {config.beta, 1.0}) {
        SimilarityMatrix sm = similarity_matrix(emb_a, emb_b, beta);
        sm.agent_a = a->first;
        sm.agent_b = b->first;
        sm.indices.assign(test_positions.begin(),
                          test_positions.begin() + static_cast<long>(T));
        const std::string tag = beta == 1.0 ? "cos" : "beta";
        write_similarity_csv(
            sm, out / "simmat" /
                    ("test_" + std::to_string(a->first) + "_" +
                     std::to_string(b->first) + "_" + tag + ".csv"));
      }
    }
  }

  nlohmann::json meta;
  meta["context"] = to_string(config.context);
  meta["epochs"] = config.epochs;
  meta["lr"] = config.lr;
  meta["lambda"] = config.lambda;
  meta["temperature"] = config.temperature;
  meta["beta"] = config.beta;
  meta["tau"] = config.tau;
  meta["window"] = config.window;
  meta["batch"] = config.batch;
  meta["cluster_period"] = config.cluster_period;
  meta["cluster_samples"] = config.cluster_samples;
  meta["seed"] = config.seed;
  meta["n_train"] = config.n_train;
  meta["n_test"] = config.n_test;
  meta["wall_seconds"] = art.wall_seconds;
  std::ofstream mf = open_for_write(out / "run.json");
  mf << meta.dump(2) << "\n";
  if (!mf) throw IoError("failed writing run.json");
}

}  // namespace detail

// Runs the full training protocol on the given datasets: per batch, every
// agent encodes and submits, the diffuser broadcasts group centroids, every
// agent steps its own optimizer; the partition is refreshed on the cluster
// schedule, and both splits are evaluated each epoch.
inline RunArtifacts train(const RunConfig& config, const ContextData& data,
                          const ProgressFn& progress = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  if (data.train.empty() || data.train.size() != data.test.size()) {
    throw ConfigError("dataset must provide the same agents in both splits");
  }
  const std::size_t n_train = data.train.front().length();
  const std::size_t n_test = data.test.front().length();
  for (const AgentDataset& ds : data.train) {
    if (ds.length() != n_train) {
      throw ConfigError("agent " + std::to_string(ds.agent_id) +
                        " train series has length " +
                        std::to_string(ds.length()) + ", expected " +
                        std::to_string(n_train));
    }
  }
  for (const AgentDataset& ds : data.test) {
    if (ds.length() != n_test) {
      throw ConfigError("agent " + std::to_string(ds.agent_id) +
                        " test series has length " +
                        std::to_string(ds.length()) + ", expected " +
                        std::to_string(n_test));
    }
  }

  // Initialization: one root stream fixes everything — per-agent parameter
  // substreams and the diffuser's sampling stream.
  RngStream root(config.seed);
  std::map<int, AgentModel> models;
  std::map<int, detail::AgentRuntime> agents;
  std::vector<int> agent_ids;
  for (std::size_t i = 0; i < data.train.size(); ++i) {
    const AgentDataset& train_ds = data.train[i];
    const AgentDataset& test_ds = data.test[i];
    if (train_ds.agent_id != test_ds.agent_id) {
      throw ConfigError("train/test agent ids do not line up");
    }
    const int id = train_ds.agent_id;
    RngStream init = root.substream(detail::kModelInitTag +
                                    static_cast<std::uint64_t>(id));
    models.emplace(id, make_agent_model(id, train_ds.n_features(), init));
    detail::AgentRuntime rt;
    rt.train = &train_ds;
    rt.test = &test_ds;
    rt.train_batches = sliding_windows(train_ds, config.window, config.batch);
    rt.test_batches = sliding_windows(test_ds, config.window, config.batch);
    agents.emplace(id, std::move(rt));
    agent_ids.push_back(id);
  }
  RngStream diffuser_rng = root.substream(detail::kDiffuserTag);

  std::map<int, std::vector<WindowBatch>> train_batches, test_batches;
  for (auto& [id, rt] : agents) {
    train_batches.emplace(id, rt.train_batches);
    test_batches.emplace(id, rt.test_batches);
  }

  const AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};
  const LossConfig loss_cfg = config.loss_config();
  const std::size_t n_batches = train_batches.begin()->second.size();
  const std::size_t n_windows = n_train - config.window + 1;

  RunArtifacts art;
  art.final_partition = single_group_partition(agent_ids, 0);
  art.metrics.push_back(evaluate(models, train_batches, art.final_partition,
                                 config, 0, "train"));
  art.metrics.push_back(
      evaluate(models, test_batches, art.final_partition, config, 0, "test"));

  std::map<int, long> submitted_step;
  for (int id : agent_ids) submitted_step[id] = -1;
  long global_step = 0;

  for (long epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t m = 0; m < n_batches; ++m) {
      // Forward pass and embedding sharing (submit barrier).
      std::map<int, EmbeddingBatch> submissions;
      std::map<int, EncodeCache> caches;
      for (const auto& [id, rt] : agents) {
        submissions.emplace(
            id, encode(models.at(id), rt.train_batches[m], &caches[id]));
        submitted_step[id] = global_step;
      }
      for (int id : agent_ids) {
        if (submitted_step.at(id) != global_step) {
          throw ContractError("barrier violation: agent " +
                              std::to_string(id) +
                              " has not submitted for step " +
                              std::to_string(global_step));
        }
      }

      // Osmotic strategy and diffusion of context embeddings.
      ContextBroadcast broadcast =
          step_broadcast(submissions, art.final_partition);

      // Local loss, backpropagation, and parameter update.
      for (const auto& [id, emb] : submissions) {
        const LossValue lv = total_loss(emb, broadcast.at(id), loss_cfg);
        if (!std::isfinite(lv.value)) {
          throw NumericError("run aborted: non-finite loss for agent " +
                             std::to_string(id) + " at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(m));
        }
        AgentModel& model = models.at(id);
        const ModelGrads grads =
            encode_backward(model, caches.at(id), lv.d_embeddings);
        apply_update(model, grads, adam);
      }
      ++global_step;
    }

    // Clustering on the configured period: compare all agents' embeddings
    // at one shared set of random training positions.
    if (partition_schedule(epoch, config.cluster_period)) {
      const std::size_t S = std::min(config.cluster_samples, n_windows);
      std::vector<std::size_t> drawn =
          diffuser_rng.sample_without_replacement(n_windows, S);
      std::vector<long> positions;
      positions.reserve(S);
      for (std::size_t w : drawn) {
        positions.push_back(static_cast<long>(w + config.window - 1));
      }
      std::sort(positions.begin(), positions.end());

      std::map<int, EmbeddingBatch> samples;
      for (const auto& [id, rt] : agents) {
        samples.emplace(
            id, encode(models.at(id),
                       windows_at(*rt.train, config.window, positions)));
      }
      art.final_partition =
          cluster_agents(samples, config.tau, config.beta, epoch);
      art.cluster_events.push_back(art.final_partition);
    }

    art.metrics.push_back(evaluate(models, train_batches, art.final_partition,
                                   config, epoch, "train"));
    art.metrics.push_back(evaluate(models, test_batches, art.final_partition,
                                   config, epoch, "test"));
    if (progress) {
      const MetricRecord& tr = art.metrics[art.metrics.size() - 2];
      const MetricRecord& te = art.metrics.back();
      progress("epoch " + std::to_string(epoch) + "/" +
               std::to_string(config.epochs) + " train_loss=" +
               format_g17(tr.context_loss) + " test_acc=" +
               (te.context_accuracy ? format_g17(*te.context_accuracy)
                                    : std::string("nan")) +
               " groups=" + std::to_string(art.final_partition.groups.size()));
    }
  }

  art.models = std::move(models);
  art.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();

  if (!config.out_dir.empty()) {
    art.out_dir = config.out_dir;
    // Final-model test embeddings for the similarity exports.
    std::map<int, Mat> test_embeddings;
    std::vector<long> test_positions;
    for (const auto& [id, model] : art.models) {
      const auto& batches = test_batches.at(id);
      std::size_t total = 0;
      for (const auto& b : batches) total += b.windows.size();
      Mat emb(total, model.embedding_dim());
      std::size_t row = 0;
      for (const auto& batch : batches) {
        EmbeddingBatch eb = encode(model, batch);
        for (std::size_t i = 0; i < eb.embeddings.rows; ++i) {
          std::copy(eb.embeddings.row(i).begin(), eb.embeddings.row(i).end(),
                    emb.row(row++).begin());
        }
        if (test_positions.size() < total) {
          test_positions.insert(test_positions.end(), eb.indices.begin(),
                                eb.indices.end());
        }
      }
      test_embeddings.emplace(id, std::move(emb));
    }
    detail::write_run_files(config, art, test_embeddings, test_positions);
  }
  return art;
}

// Generates the configured context inline and trains on it.
inline RunArtifacts train(const RunConfig& config,
                          const ProgressFn& progress = {}) {
  return train(config, make_context(config.context_spec()), progress);
}

}  // namespace osmo
