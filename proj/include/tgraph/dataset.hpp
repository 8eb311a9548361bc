// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// On-disk and in-memory representation of computation graphs, layout
// configuration sets and measured runtimes. One JSON document per graph
// under <root>/<collection>/<split>/<graph_id>.json plus <root>/manifest.json.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tgraph/common.hpp"

namespace tgraph {

inline constexpr int64_t kNodeFeatDim = 140;
inline constexpr int64_t kNumericFeatDim = 134;   // node_feat[:134]
inline constexpr int64_t kLayoutSlotDim = 6;      // node_feat[134:]
inline constexpr int64_t kConfigSlotDim = 18;     // three 6-vectors per node
inline constexpr int64_t kTileFeatDim = 24;
inline constexpr int64_t kLayoutCodeBound = 117649;  // 7^6

enum class Collection { layout_random, layout_default, tile };
enum class Group { xla, nlp };

struct CollectionKind {
  Collection collection = Collection::layout_random;
  Group group = Group::xla;

  bool is_tile() const { return collection == Collection::tile; }
  std::string dir_name() const;  // layout-xla-random, layout-nlp-default, tile-xla
};

std::string to_string(Collection c);
std::string to_string(Group g);
Collection collection_from_string(const std::string& s);
Group group_from_string(const std::string& s);

struct ComputationGraph {
  std::string graph_id;
  std::vector<int32_t> opcodes;                      // one per node
  std::vector<double> node_feat;                     // n_nodes x 140 row-major
  std::vector<int32_t> node_output_ranks;            // 0..6; layout collections only
  std::vector<std::pair<int32_t, int32_t>> edges;    // (src, dst)
  std::vector<int32_t> configurable_nodes;           // strictly increasing

  int64_t n_nodes() const { return static_cast<int64_t>(opcodes.size()); }
  const double* feat_row(int64_t node) const { return node_feat.data() + node * kNodeFeatDim; }
  double* feat_row(int64_t node) { return node_feat.data() + node * kNodeFeatDim; }
  void validate() const;  // throws ValidationError naming the broken invariant
};

// One layout choice for a configurable node: output/input/kernel axis orders,
// entries in {-1..5} with -1 padding as a contiguous suffix.
struct LayoutConfig {
  std::array<std::array<int8_t, 6>, 3> axes{};
  void validate() const;
};

struct ConfigurationSet {
  // Layout collections store configurations compressed: three base-7 codes
  // per configurable node. Decompression happens per sampled batch.
  std::vector<int32_t> layout_codes;  // n_configs x n_config_nodes x 3
  int64_t n_config_nodes = 0;
  std::vector<double> tile_feats;     // n_configs x 24 (tile collections)
  std::vector<int64_t> runtimes_ns;
  bool is_tile = false;

  int64_t n_configs() const { return static_cast<int64_t>(runtimes_ns.size()); }
  const int32_t* codes_row(int64_t config) const {
    return layout_codes.data() + config * n_config_nodes * 3;
  }
  const double* tile_row(int64_t config) const {
    return tile_feats.data() + config * kTileFeatDim;
  }
  void validate() const;
};

// Hidden runtime function emitted alongside synthetic datasets so tests can
// recompute every stored runtime independently.
struct SyntheticOracle {
  std::vector<int64_t> node_cost;                 // per opcode, always applied
  std::vector<int32_t> codes;                     // layout code vocabulary
  std::vector<std::vector<int64_t>> node_table;   // v_op x |codes|
  std::vector<std::vector<int64_t>> interaction;  // |codes| x |codes|
  std::vector<double> tile_weights;               // tile collections (24)
};

struct DatasetManifest {
  CollectionKind kind;
  int64_t v_op = 0;
  int64_t feature_dim = kNodeFeatDim;
  bool preprocessed = false;
  bool dedup_applied = false;
  // dataset-level feature statistics, filled by preprocess
  std::vector<double> scaler_mean, scaler_std;                // 134 each
  std::vector<double> config_scaler_mean, config_scaler_std;  // 24 each (tile)
  std::optional<SyntheticOracle> oracle;
  std::optional<uint64_t> generator_seed;
};

struct LoadedGraph {
  ComputationGraph graph;
  ConfigurationSet configs;
  CollectionKind kind;
  std::vector<int32_t> node_origin;  // new -> original index (preprocessed graphs)
  bool pruned = false;
  bool stored_compressed = false;  // file carried configs_compressed
};

LoadedGraph load_graph(const std::filesystem::path& path);
// Bit-stable: identical inputs produce byte-identical files.
void save_graph(const LoadedGraph& g, const std::filesystem::path& path);

DatasetManifest load_manifest(const std::filesystem::path& root);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& root);

struct Dataset {
  std::filesystem::path root;
  DatasetManifest manifest;
  std::vector<LoadedGraph> graphs;  // sorted by graph_id
};

Dataset load_dataset(const std::filesystem::path& root);

struct SynthParams {
  uint64_t seed = 1;
  int64_t n_graphs = 10;
  int64_t nodes_min = 8;
  int64_t nodes_max = 40;
  int64_t configs_per_graph = 100;
  Collection collection = Collection::layout_random;
  Group group = Group::xla;
  int64_t v_op = 8;
  int64_t max_rank = 3;  // tensor ranks drawn from 1..max_rank (<= 4)
  double configurable_prob = 0.35;
  void validate() const;
};

// Random DAGs with runtimes defined by a hidden additive function: a fixed
// per-opcode cost for every node, a per-(opcode, layout) cost for every
// configurable node, and a pairwise interaction cost for every edge whose
// endpoints are both configurable. Same seed, same bytes.
void generate_synthetic(const SynthParams& params, const std::filesystem::path& out_dir);

// Reapply the hidden function to a stored configuration.
int64_t oracle_runtime(const SyntheticOracle& oracle, const LoadedGraph& g, int64_t config);

}  // namespace tgraph
