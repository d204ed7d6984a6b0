#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "osmo/errors.hpp"
#include "osmo/format.hpp"
#include "osmo/model.hpp"

namespace osmo {

// Checkpoint layout: one file per agent, a single-line JSON header
// describing the block shapes, then the raw little-endian f64 payload in
// block order followed by the Adam moments. Round-trips are bit-exact.

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are little-endian");

inline std::filesystem::path checkpoint_path(const std::filesystem::path& dir,
                                             int agent_id) {
  return dir / ("agent_" + std::to_string(agent_id) + ".ckpt");
}

inline void save_checkpoint(const AgentModel& model,
                            const std::filesystem::path& path) {
  nlohmann::json header;
  header["agent_id"] = model.agent_id;
  header["n_features"] = model.n_features;
  header["hidden"] = model.hidden_size();
  header["embedding"] = model.embedding_dim();
  header["adam_t"] = model.opt.t;
  header["byte_order"] = "little";
  nlohmann::json blocks = nlohmann::json::array();
  visit_model_blocks(model, [&](const char* name,
                                std::span<const double> block) {
    blocks.push_back({{"name", name}, {"len", block.size()}});
  });
  blocks.push_back({{"name", "adam_m"}, {"len", model.opt.m.size()}});
  blocks.push_back({{"name", "adam_v"}, {"len", model.opt.v.size()}});
  header["blocks"] = std::move(blocks);

  std::ofstream out = open_for_write(path);
  out << header.dump() << "\n";
  const auto dump = [&](std::span<const double> block) {
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size() * sizeof(double)));
  };
  visit_model_blocks(model,
                     [&](const char*, std::span<const double> b) { dump(b); });
  dump(model.opt.m);
  dump(model.opt.v);
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

inline AgentModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in = open_for_read(path);
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw IoError("checkpoint '" + path.string() + "' has no header");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint '" + path.string() + "' header is not JSON: " +
                  e.what());
  }
  if (header.value("byte_order", "") != "little") {
    throw IoError("checkpoint '" + path.string() +
                  "' has unsupported byte order");
  }

  AgentModel model(header.at("agent_id").get<int>(),
                   header.at("n_features").get<std::size_t>(),
                   header.at("hidden").get<std::size_t>(),
                   header.at("embedding").get<std::size_t>());
  model.opt.t = header.at("adam_t").get<long>();

  const auto& blocks = header.at("blocks");
  std::size_t cursor = 0;
  const auto read_block = [&](const char* name, std::span<double> dest) {
    if (cursor >= blocks.size()) {
      throw IoError("checkpoint '" + path.string() + "' is missing block '" +
                    std::string(name) + "'");
    }
    const auto& blk = blocks[cursor++];
    if (blk.at("name").get<std::string>() != name ||
        blk.at("len").get<std::size_t>() != dest.size()) {
      throw IoError("checkpoint '" + path.string() + "' block " +
                    blk.at("name").get<std::string>() + " does not match '" +
                    std::string(name) + "' of length " +
                    std::to_string(dest.size()));
    }
    in.read(reinterpret_cast<char*>(dest.data()),
            static_cast<std::streamsize>(dest.size() * sizeof(double)));
    if (!in) {
      throw IoError("checkpoint '" + path.string() + "' payload truncated in " +
                    std::string(name));
    }
  };
  visit_model_blocks(model, read_block);
  read_block("adam_m", model.opt.m);
  read_block("adam_v", model.opt.v);
  return model;
}

inline void save_all_checkpoints(const std::map<int, AgentModel>& models,
                                 const std::filesystem::path& dir) {
  for (const auto& [id, model] : models) {
    save_checkpoint(model, checkpoint_path(dir, id));
  }
}

// Restores exactly the expected agent set; anything missing or extra is a
// schema error.
inline std::map<int, AgentModel> restore_all_checkpoints(
    const std::filesystem::path& dir, const std::set<int>& expected_agents) {
  std::map<int, AgentModel> models;
  for (int id : expected_agents) {
    const auto path = checkpoint_path(dir, id);
    if (!std::filesystem::exists(path)) {
      throw IoError("checkpoint for agent " + std::to_string(id) +
                    " not found under '" + dir.string() + "'");
    }
    AgentModel model = load_checkpoint(path);
    if (model.agent_id != id) {
      throw IoError("checkpoint '" + path.string() + "' is for agent " +
                    std::to_string(model.agent_id) + ", expected " +
                    std::to_string(id));
    }
    models.emplace(id, std::move(model));
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with("agent_") && name.ends_with(".ckpt")) {
      const int id = std::atoi(name.substr(6).c_str());
      if (!expected_agents.contains(id)) {
        throw IoError("checkpoint directory '" + dir.string() +
                      "' contains unexpected agent " + std::to_string(id));
      }
    }
  }
  return models;
}

}  // namespace osmo
