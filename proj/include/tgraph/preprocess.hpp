// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Training-ready graph preparation: pruning to the configurable
// neighborhood, configuration deduplication, base-7 layout compression,
// pad normalization and feature scaling.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tgraph/dataset.hpp"

namespace tgraph {

struct PrunedGraph {
  ComputationGraph graph;
  std::vector<int32_t> node_origin;  // new index -> original index, injective
  bool empty() const { return graph.n_nodes() == 0; }
};

// Keep nodes that are configurable or adjacent (either edge direction) to a
// configurable node. A graph with no configurable nodes prunes to empty;
// layout training skips such graphs.
PrunedGraph prune(const ComputationGraph& g);

// Remove duplicate configurations, keeping the first occurrence order and
// the smallest runtime within each duplicate group.
ConfigurationSet dedup(const ConfigurationSet& c);

// vec6 entries in {-1..5}; code = sum of (entry+1) * 7^position,
// little-endian (position 0 least significant).
int32_t compress_layout(const std::array<int8_t, 6>& vec6);
std::array<int8_t, 6> decompress_layout(int32_t code);

// Rewrite the padding of node_feat[134:] from 0 to -1 using the per-node
// output tensor rank, so the layout slots share one vocabulary with
// configuration layouts. Genuine axis index 0 within rank is preserved.
void repad_node_feat(ComputationGraph& g);

struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> std_dev;
  std::vector<std::string> fitted_on;  // graph ids, fit provenance

  static constexpr double kStdFloor = 1e-6;
  int64_t dim() const { return static_cast<int64_t>(mean.size()); }
  bool empty() const { return mean.empty(); }
  // (x - mean) / std, or x - mean alone where std is below the floor.
  void apply_row(const double* in, double* out) const;
  void unapply_row(const double* in, double* out) const;
};

// Column statistics over node_feat[:134] of the given graphs (two-pass,
// deterministic accumulation order). Throws on an empty training set.
FeatureScaler fit_scaler(const std::vector<const ComputationGraph*>& graphs);
// Tile collections: statistics over per-configuration config_feat rows.
FeatureScaler fit_config_scaler(const std::vector<const ConfigurationSet*>& sets,
                                const std::vector<std::string>& ids);

struct PreprocessOptions {
  bool prune = true;
  bool dedup = true;
};

void preprocess_dataset(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                        const PreprocessOptions& options);

}  // namespace tgraph
