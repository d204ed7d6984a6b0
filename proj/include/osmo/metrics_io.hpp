#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "osmo/format.hpp"
#include "osmo/metrics.hpp"

namespace osmo {

// One row per position p, comma-separated comparison against every q.
inline void write_similarity_csv(const SimilarityMatrix& sm,
                                 const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << "# agents=" << sm.agent_a << "," << sm.agent_b
      << " beta=" << format_g17(sm.beta) << " T=" << sm.values.rows << "\n";
  for (std::size_t p = 0; p < sm.values.rows; ++p) {
    for (std::size_t q = 0; q < sm.values.cols; ++q) {
      if (q > 0) out << ",";
      out << format_g17(sm.values(p, q));
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// Plain-text portable graymap, [-1,1] mapped linearly to [0,255], for quick
// eyeballing without a plotting stack.
inline void write_similarity_pgm(const SimilarityMatrix& sm,
                                 const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << "P2\n# agents=" << sm.agent_a << "," << sm.agent_b
      << " beta=" << format_g17(sm.beta) << "\n"
      << sm.values.cols << " " << sm.values.rows << "\n255\n";
  for (std::size_t p = 0; p < sm.values.rows; ++p) {
    for (std::size_t q = 0; q < sm.values.cols; ++q) {
      const double v = std::clamp(sm.values(p, q), -1.0, 1.0);
      const int gray = static_cast<int>(std::lround((v + 1.0) * 127.5));
      out << gray << (q + 1 == sm.values.cols ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string group_label(const std::vector<int>& members) {
  std::string label;
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (i > 0) label += "-";
    label += std::to_string(members[i]);
  }
  return label;
}

// epoch,split,group_id,accuracy,loss; one row per group plus an `overall`
// row per record. Undefined accuracies are written as nan.
inline void write_metrics_csv(const std::vector<MetricRecord>& records,
                              const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  out << "epoch,split,group_id,accuracy,loss\n";
  for (const MetricRecord& rec : records) {
    for (const GroupMetric& g : rec.groups) {
      out << rec.epoch << "," << rec.split << "," << group_label(g.members)
          << "," << (g.accuracy ? format_g17(*g.accuracy) : "nan") << ","
          << format_g17(g.loss) << "\n";
    }
    out << rec.epoch << "," << rec.split << ",overall,"
        << (rec.context_accuracy ? format_g17(*rec.context_accuracy) : "nan")
        << "," << format_g17(rec.context_loss) << "\n";
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace osmo
