// Command-line front end: generate datasets, run training, evaluate
// checkpoints, and export similarity matrices / cluster traces as plain
// CSV for external plotting. Machine output goes to files only; progress
// goes to stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "osmo/checkpoint.hpp"
#include "osmo/config.hpp"
#include "osmo/datagen.hpp"
#include "osmo/dataset_io.hpp"
#include "osmo/errors.hpp"
#include "osmo/metrics_io.hpp"
#include "osmo/orchestrator.hpp"

namespace {

enum class LogLevel { error = 0, info = 1, debug = 2 };

LogLevel log_level() {
  const char* env = std::getenv("OSMO_LOG");
  if (env == nullptr) return LogLevel::info;
  const std::string v = env;
  if (v == "error") return LogLevel::error;
  if (v == "info") return LogLevel::info;
  if (v == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void log(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) {
    std::cerr << msg << "\n";
  }
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string data_dir;
  long long seed = -1;
  bool seed_set = false;
};

osmo::RunConfig resolve_config(const CommonArgs& args) {
  osmo::RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = osmo::parse_config_file(args.config_path);
  }
  osmo::apply_overrides(cfg, args.overrides);
  if (args.seed_set) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  cfg.validate();
  return cfg;
}

osmo::RunConfig load_run_meta(const std::filesystem::path& run_dir) {
  std::ifstream in = osmo::open_for_read(run_dir / "run.json");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw osmo::IoError("run.json is not valid JSON: " + std::string(e.what()));
  }
  osmo::RunConfig cfg;
  cfg.context =
      osmo::context_kind_from_string(meta.at("context").get<std::string>());
  cfg.epochs = meta.at("epochs").get<long>();
  cfg.lr = meta.at("lr").get<double>();
  cfg.lambda = meta.at("lambda").get<double>();
  cfg.temperature = meta.at("temperature").get<double>();
  cfg.beta = meta.at("beta").get<double>();
  cfg.tau = meta.at("tau").get<double>();
  cfg.window = meta.at("window").get<std::size_t>();
  cfg.batch = meta.at("batch").get<std::size_t>();
  cfg.cluster_period = meta.at("cluster_period").get<long>();
  cfg.cluster_samples = meta.at("cluster_samples").get<std::size_t>();
  cfg.seed = meta.at("seed").get<std::uint64_t>();
  cfg.n_train = meta.at("n_train").get<std::size_t>();
  cfg.n_test = meta.at("n_test").get<std::size_t>();
  cfg.out_dir = run_dir.string();
  return cfg;
}

// Last reclustering recorded in the run, or the single global group.
osmo::SubContextPartition load_final_partition(
    const std::filesystem::path& run_dir, const std::vector<int>& agent_ids) {
  const auto path = run_dir / "clusters.jsonl";
  osmo::SubContextPartition partition =
      osmo::single_group_partition(agent_ids);
  if (!std::filesystem::exists(path)) return partition;
  std::ifstream in = osmo::open_for_read(path);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  if (last.empty()) return partition;
  const nlohmann::json rec = nlohmann::json::parse(last);
  partition.epoch = rec.at("epoch").get<long>();
  partition.groups = rec.at("groups").get<std::vector<std::vector<int>>>();
  partition.agent_ids = rec.at("agent_ids").get<std::vector<int>>();
  return partition;
}

osmo::ContextData load_or_generate(const osmo::RunConfig& cfg,
                                   const std::string& data_dir) {
  if (!data_dir.empty()) {
    log(LogLevel::info, "loading datasets from " + data_dir);
    return osmo::read_context_csv(data_dir);
  }
  log(LogLevel::info,
      "generating context '" + osmo::to_string(cfg.context) + "' with seed " +
          std::to_string(cfg.seed));
  return osmo::make_context(cfg.context_spec());
}

std::string beta_tag(double beta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "beta%g", beta);
  return buf;
}

int cmd_generate(const CommonArgs& args) {
  osmo::RunConfig cfg = resolve_config(args);
  if (cfg.out_dir.empty()) {
    throw osmo::ConfigError("key 'out_dir': generate needs an output directory");
  }
  const osmo::ContextSpec spec = cfg.context_spec();
  const osmo::ContextData data = osmo::make_context(spec);
  osmo::write_context_csv(data, spec, cfg.out_dir);
  log(LogLevel::info, "wrote " +
                          std::to_string(data.train.size() + data.test.size()) +
                          " dataset files to " + cfg.out_dir);
  return 0;
}

int cmd_train(const CommonArgs& args) {
  osmo::RunConfig cfg = resolve_config(args);
  const osmo::ContextData data = load_or_generate(cfg, args.data_dir);
  const osmo::RunArtifacts art = osmo::train(
      cfg, data, [](const std::string& msg) { log(LogLevel::info, msg); });
  log(LogLevel::info,
      "run finished in " + osmo::format_g17(art.wall_seconds) + "s" +
          (cfg.out_dir.empty() ? "" : ", artifacts in " + cfg.out_dir));
  return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& split,
             const std::string& data_dir) {
  osmo::RunConfig cfg = load_run_meta(run_dir);
  const osmo::ContextData data = load_or_generate(cfg, data_dir);
  std::set<int> ids;
  std::vector<int> id_list;
  for (const auto& ds : data.train) {
    ids.insert(ds.agent_id);
    id_list.push_back(ds.agent_id);
  }
  const auto models =
      osmo::restore_all_checkpoints(std::filesystem::path(run_dir) / "checkpoints", ids);
  const osmo::SubContextPartition partition =
      load_final_partition(run_dir, id_list);

  std::vector<osmo::MetricRecord> records;
  for (const std::string& s : {std::string("train"), std::string("test")}) {
    if (split != "both" && split != s) continue;
    std::map<int, std::vector<osmo::WindowBatch>> batches;
    for (const auto& ds : (s == "train" ? data.train : data.test)) {
      batches.emplace(ds.agent_id,
                      osmo::sliding_windows(ds, cfg.window, cfg.batch));
    }
    records.push_back(osmo::evaluate(models, batches, partition, cfg,
                                     partition.epoch, s));
    const auto& rec = records.back();
    log(LogLevel::info,
        s + " accuracy=" +
            (rec.context_accuracy ? osmo::format_g17(*rec.context_accuracy)
                                  : std::string("nan")) +
            " loss=" + osmo::format_g17(rec.context_loss));
  }
  osmo::write_metrics_csv(records,
                          std::filesystem::path(run_dir) / "eval_metrics.csv");
  return 0;
}

int cmd_export_simmat(const std::string& run_dir, const std::string& agents,
                      const std::string& split, double beta, bool beta_set,
                      bool pgm, const std::string& data_dir) {
  osmo::RunConfig cfg = load_run_meta(run_dir);
  if (beta_set) cfg.beta = beta;

  const auto comma = agents.find(',');
  if (comma == std::string::npos) {
    throw osmo::ConfigError("--agents must be two ids like '0,1', got '" +
                            agents + "'");
  }
  const int id_a = std::atoi(agents.substr(0, comma).c_str());
  const int id_b = std::atoi(agents.substr(comma + 1).c_str());

  const osmo::ContextData data = load_or_generate(cfg, data_dir);
  std::set<int> ids;
  for (const auto& ds : data.train) ids.insert(ds.agent_id);
  if (!ids.contains(id_a) || !ids.contains(id_b)) {
    throw osmo::ConfigError("agent pair " + agents +
                            " not present in the run's datasets");
  }
  const auto models = osmo::restore_all_checkpoints(
      std::filesystem::path(run_dir) / "checkpoints", ids);

  const auto& bucket = split == "train" ? data.train : data.test;
  std::map<int, osmo::Mat> embeddings;
  std::vector<long> positions;
  for (const auto& ds : bucket) {
    if (ds.agent_id != id_a && ds.agent_id != id_b) continue;
    const auto batches = osmo::sliding_windows(ds, cfg.window, cfg.batch);
    std::size_t total = 0;
    for (const auto& b : batches) total += b.windows.size();
    const std::size_t cap = std::min<std::size_t>(total, 200);
    osmo::Mat emb(cap, osmo::kEmbeddingDim);
    std::size_t row = 0;
    std::vector<long> pos;
    for (const auto& batch : batches) {
      if (row >= cap) break;
      const osmo::EmbeddingBatch eb = osmo::encode(models.at(ds.agent_id), batch);
      for (std::size_t i = 0; i < eb.embeddings.rows && row < cap; ++i) {
        std::copy(eb.embeddings.row(i).begin(), eb.embeddings.row(i).end(),
                  emb.row(row++).begin());
        pos.push_back(eb.indices[i]);
      }
    }
    positions = pos;
    embeddings.emplace(ds.agent_id, std::move(emb));
  }

  osmo::SimilarityMatrix sm = osmo::similarity_matrix(
      embeddings.at(id_a), embeddings.at(id_b), cfg.beta);
  sm.agent_a = id_a;
  sm.agent_b = id_b;
  sm.indices = positions;

  const auto base = std::filesystem::path(run_dir) / "simmat" /
                    (split + "_" + std::to_string(id_a) + "_" +
                     std::to_string(id_b) + "_" + beta_tag(cfg.beta));
  osmo::write_similarity_csv(sm, base.string() + ".csv");
  log(LogLevel::info, "wrote " + base.string() + ".csv (" +
                          std::to_string(sm.values.rows) + "x" +
                          std::to_string(sm.values.cols) + ")");
  if (pgm) {
    osmo::write_similarity_pgm(sm, base.string() + ".pgm");
    log(LogLevel::info, "wrote " + base.string() + ".pgm");
  }
  return 0;
}

int cmd_export_clusters(const std::string& run_dir) {
  const auto path = std::filesystem::path(run_dir) / "clusters.jsonl";
  std::ifstream in = osmo::open_for_read(path);
  std::ofstream out = osmo::open_for_write(std::filesystem::path(run_dir) /
                                           "clusters.csv");
  out << "epoch,group_id,agent_id\n";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw osmo::IoError("clusters.jsonl: bad record: " + std::string(e.what()));
    }
    const long epoch = rec.at("epoch").get<long>();
    const auto groups = rec.at("groups").get<std::vector<std::vector<int>>>();
    for (const auto& group : groups) {
      for (int id : group) {
        out << epoch << "," << osmo::group_label(group) << "," << id << "\n";
      }
    }
  }
  if (!out) throw osmo::IoError("failed writing clusters.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"osmo: osmotic representation alignment simulator"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args;
  std::string run_dir, split = "test", agents, export_data_dir, eval_data_dir;
  double beta = 2.0;
  bool pgm = false;

  auto add_common = [](CLI::App* cmd, CommonArgs& args, bool with_data) {
    cmd->add_option("--config", args.config_path, "config file (key=value lines)");
    cmd->add_option("--set", args.overrides, "override, e.g. --set epochs=5")
        ->take_all();
    cmd->add_option("--out", args.out_dir, "output directory");
    auto* seed =
        cmd->add_option("--seed", args.seed, "override the run seed");
    seed->each([&args](const std::string&) { args.seed_set = true; });
    if (with_data) {
      cmd->add_option("--data", args.data_dir,
                      "load datasets from CSV instead of generating");
    }
  };

  CLI::App* generate = app.add_subcommand("generate", "write dataset CSVs");
  add_common(generate, gen_args, false);

  CLI::App* train = app.add_subcommand("train", "run the training protocol");
  add_common(train, train_args, true);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a finished run");
  eval->add_option("--run", run_dir, "run directory")->required();
  eval->add_option("--split", split, "train, test or both")
      ->check(CLI::IsMember({"train", "test", "both"}));
  eval->add_option("--data", eval_data_dir, "load datasets from CSV");

  CLI::App* simmat =
      app.add_subcommand("export-simmat", "export a similarity matrix");
  simmat->add_option("--run", run_dir, "run directory")->required();
  simmat->add_option("--agents", agents, "pair of agent ids, e.g. 0,1")
      ->required();
  simmat->add_option("--split", split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  auto* beta_opt = simmat->add_option("--beta", beta, "similarity exponent");
  simmat->add_flag("--pgm", pgm, "also write a graymap image");
  simmat->add_option("--data", export_data_dir, "load datasets from CSV");

  CLI::App* clusters =
      app.add_subcommand("export-clusters", "flatten cluster trace to CSV");
  clusters->add_option("--run", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen_args);
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(run_dir, split, eval_data_dir);
    if (simmat->parsed()) {
      return cmd_export_simmat(run_dir, agents, split, beta,
                               beta_opt->count() > 0, pgm, export_data_dir);
    }
    if (clusters->parsed()) return cmd_export_clusters(run_dir);
  } catch (const osmo::ConfigError& e) {
    log(LogLevel::error, std::string("configuration error: ") + e.what());
    return 1;
  } catch (const osmo::IoError& e) {
    log(LogLevel::error, std::string("io error: ") + e.what());
    return 3;
  } catch (const std::exception& e) {
    log(LogLevel::error, std::string("error: ") + e.what());
    return 2;
  }
  return 1;
}
