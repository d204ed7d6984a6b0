#pragma once

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "osmo/datagen.hpp"
#include "osmo/errors.hpp"
#include "osmo/format.hpp"

namespace osmo {

// CSV schema: optional '#' comment lines, a header row
// t,feature_0[,feature_1,...], then one row per timestamp. Values are
// written with enough digits to re-import the exact same doubles.

inline std::filesystem::path dataset_csv_path(
    const std::filesystem::path& dir, int agent_id, const std::string& split) {
  return dir / ("agent" + std::to_string(agent_id) + "_" + split + ".csv");
}

inline void write_dataset_csv(const AgentDataset& dataset,
                              const ContextSpec& spec,
                              const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  const GeneratorConstants& c = spec.constants;
  out << "# generator=" << to_string(spec.kind) << " seed=" << spec.seed
      << " agent=" << dataset.agent_id << " split=" << dataset.split << "\n";
  out << "# constants base_period=" << c.base_period
      << " jitter_sigma=" << format_g17(c.jitter_sigma)
      << " osc_amplitude=" << format_g17(c.osc_amplitude)
      << " osc_period=" << c.osc_period
      << " offset_agent0=" << format_g17(c.offset_agent0)
      << " offset_agent1=" << format_g17(c.offset_agent1)
      << " second_period=" << c.second_period
      << " partial_scale=" << format_g17(c.partial_scale)
      << " sine_amplitude=" << format_g17(c.sine_amplitude)
      << " sine_period=" << c.sine_period
      << " discretize_levels=" << c.discretize_levels << "\n";
  out << "t";
  for (std::size_t f = 0; f < dataset.n_features(); ++f)
    out << ",feature_" << f;
  out << "\n";
  for (std::size_t t = 0; t < dataset.length(); ++t) {
    out << t;
    for (std::size_t f = 0; f < dataset.n_features(); ++f)
      out << "," << format_g17(dataset.features[f][t]);
    out << "\n";
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline AgentDataset read_dataset_csv(const std::filesystem::path& path,
                                     int agent_id, const std::string& split) {
  std::ifstream in = open_for_read(path);
  AgentDataset dataset;
  dataset.agent_id = agent_id;
  dataset.split = split;

  std::string line;
  bool saw_header = false;
  long expected_t = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::stringstream row(line);
    std::string cell;
    if (!saw_header) {
      std::getline(row, cell, ',');
      if (cell != "t") {
        throw IoError("'" + path.string() +
                      "': header must start with column 't', got '" + cell +
                      "'");
      }
      std::size_t features = 0;
      while (std::getline(row, cell, ',')) ++features;
      if (features == 0) {
        throw IoError("'" + path.string() + "': no feature columns");
      }
      dataset.features.assign(features, Vec{});
      saw_header = true;
      continue;
    }
    std::getline(row, cell, ',');
    char* end = nullptr;
    const long t = std::strtol(cell.c_str(), &end, 10);
    if (end == cell.c_str() || t != expected_t) {
      throw IoError("'" + path.string() + "': expected timestamp " +
                    std::to_string(expected_t) + ", got '" + cell + "'");
    }
    ++expected_t;
    for (std::size_t f = 0; f < dataset.n_features(); ++f) {
      if (!std::getline(row, cell, ',')) {
        throw IoError("'" + path.string() + "': row " + std::to_string(t) +
                      " has too few columns");
      }
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw IoError("'" + path.string() + "': bad value '" + cell +
                      "' at row " + std::to_string(t));
      }
      dataset.features[f].push_back(v);
    }
  }
  if (!saw_header || dataset.length() == 0) {
    throw IoError("'" + path.string() + "': no data rows");
  }
  return dataset;
}

inline void write_context_csv(const ContextData& data, const ContextSpec& spec,
                              const std::filesystem::path& dir) {
  for (const AgentDataset& ds : data.train)
    write_dataset_csv(ds, spec, dataset_csv_path(dir, ds.agent_id, ds.split));
  for (const AgentDataset& ds : data.test)
    write_dataset_csv(ds, spec, dataset_csv_path(dir, ds.agent_id, ds.split));
}

// Loads agent<k>_train.csv / agent<k>_test.csv pairs for ids 0,1,2,... until
// the next id is missing.
inline ContextData read_context_csv(const std::filesystem::path& dir) {
  ContextData data;
  for (int id = 0;; ++id) {
    const auto train_path = dataset_csv_path(dir, id, "train");
    const auto test_path = dataset_csv_path(dir, id, "test");
    if (!std::filesystem::exists(train_path)) break;
    data.train.push_back(read_dataset_csv(train_path, id, "train"));
    data.test.push_back(read_dataset_csv(test_path, id, "test"));
  }
  if (data.train.empty()) {
    throw IoError("no agent0_train.csv under '" + dir.string() + "'");
  }
  return data;
}

}  // namespace osmo
