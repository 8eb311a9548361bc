// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace tgraph {

PrunedGraph prune(const ComputationGraph& g) {
  g.validate();
  const int64_t n = g.n_nodes();
  std::vector<bool> keep(static_cast<size_t>(n), false);
  std::vector<bool> is_cfg(static_cast<size_t>(n), false);
  for (int32_t c : g.configurable_nodes) {
    keep[static_cast<size_t>(c)] = true;
    is_cfg[static_cast<size_t>(c)] = true;
  }
  for (const auto& [src, dst] : g.edges) {
    if (is_cfg[static_cast<size_t>(src)]) keep[static_cast<size_t>(dst)] = true;
    if (is_cfg[static_cast<size_t>(dst)]) keep[static_cast<size_t>(src)] = true;
  }

  PrunedGraph out;
  out.graph.graph_id = g.graph_id;
  std::vector<int32_t> remap(static_cast<size_t>(n), -1);
  for (int64_t i = 0; i < n; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    remap[static_cast<size_t>(i)] = static_cast<int32_t>(out.node_origin.size());
    out.node_origin.push_back(static_cast<int32_t>(i));
    out.graph.opcodes.push_back(g.opcodes[static_cast<size_t>(i)]);
    if (!g.node_output_ranks.empty())
      out.graph.node_output_ranks.push_back(g.node_output_ranks[static_cast<size_t>(i)]);
    const double* row = g.feat_row(i);
    out.graph.node_feat.insert(out.graph.node_feat.end(), row, row + kNodeFeatDim);
  }
  for (const auto& [src, dst] : g.edges) {
    const int32_t s = remap[static_cast<size_t>(src)];
    const int32_t d = remap[static_cast<size_t>(dst)];
    if (s >= 0 && d >= 0) out.graph.edges.emplace_back(s, d);
  }
  for (int32_t c : g.configurable_nodes)
    out.graph.configurable_nodes.push_back(remap[static_cast<size_t>(c)]);
  return out;
}

ConfigurationSet dedup(const ConfigurationSet& c) {
  c.validate();
  ConfigurationSet out;
  out.is_tile = c.is_tile;
  out.n_config_nodes = c.n_config_nodes;

  std::unordered_map<std::string, int64_t> seen;  // config bytes -> output index
  for (int64_t ci = 0; ci < c.n_configs(); ++ci) {
    std::string key;
    if (c.is_tile) {
      key.assign(reinterpret_cast<const char*>(c.tile_row(ci)), kTileFeatDim * sizeof(double));
    } else {
      key.assign(reinterpret_cast<const char*>(c.codes_row(ci)),
                 static_cast<size_t>(c.n_config_nodes) * 3 * sizeof(int32_t));
    }
    auto [it, inserted] = seen.emplace(std::move(key), out.n_configs());
    if (inserted) {
      if (c.is_tile) {
        const double* row = c.tile_row(ci);
        out.tile_feats.insert(out.tile_feats.end(), row, row + kTileFeatDim);
      } else {
        const int32_t* row = c.codes_row(ci);
        out.layout_codes.insert(out.layout_codes.end(), row, row + c.n_config_nodes * 3);
      }
      out.runtimes_ns.push_back(c.runtimes_ns[static_cast<size_t>(ci)]);
    } else {
      int64_t& kept = out.runtimes_ns[static_cast<size_t>(it->second)];
      kept = std::min(kept, c.runtimes_ns[static_cast<size_t>(ci)]);
    }
  }
  return out;
}

int32_t compress_layout(const std::array<int8_t, 6>& vec6) {
  int32_t code = 0;
  int32_t base = 1;
  for (int i = 0; i < 6; ++i) {
    if (vec6[static_cast<size_t>(i)] < -1 || vec6[static_cast<size_t>(i)] > 5)
      throw ValidationError("compress_layout: entries must be in {-1..5}");
    code += (vec6[static_cast<size_t>(i)] + 1) * base;
    base *= 7;
  }
  return code;
}

std::array<int8_t, 6> decompress_layout(int32_t code) {
  if (code < 0 || code >= kLayoutCodeBound)
    throw ValidationError("decompress_layout: code out of range [0, 7^6)");
  std::array<int8_t, 6> vec{};
  for (int i = 0; i < 6; ++i) {
    vec[static_cast<size_t>(i)] = static_cast<int8_t>(code % 7 - 1);
    code /= 7;
  }
  return vec;
}

void repad_node_feat(ComputationGraph& g) {
  if (g.node_output_ranks.empty())
    throw ValidationError("repad_node_feat: graph '" + g.graph_id +
                          "' lacks node_output_ranks (tensor-rank metadata)");
  for (int64_t i = 0; i < g.n_nodes(); ++i) {
    double* row = g.feat_row(i);
    const int32_t rank = g.node_output_ranks[static_cast<size_t>(i)];
    for (int64_t s = rank; s < kLayoutSlotDim; ++s) row[kNumericFeatDim + s] = -1.0;
  }
}

void FeatureScaler::apply_row(const double* in, double* out) const {
  for (int64_t c = 0; c < dim(); ++c) {
    const double centered = in[c] - mean[static_cast<size_t>(c)];
    const double s = std_dev[static_cast<size_t>(c)];
    out[c] = s < kStdFloor ? centered : centered / s;
  }
}

void FeatureScaler::unapply_row(const double* in, double* out) const {
  for (int64_t c = 0; c < dim(); ++c) {
    const double s = std_dev[static_cast<size_t>(c)];
    out[c] = (s < kStdFloor ? in[c] : in[c] * s) + mean[static_cast<size_t>(c)];
  }
}

namespace {

// Two-pass column statistics with a fixed accumulation order.
FeatureScaler fit_columns(const std::vector<std::pair<const double*, int64_t>>& blocks,
                          int64_t row_stride, int64_t dim) {
  int64_t count = 0;
  for (const auto& [ptr, rows] : blocks) {
    (void)ptr;
    count += rows;
  }
  if (count == 0) throw ValidationError("fit_scaler: empty training set");
  FeatureScaler sc;
  sc.mean.assign(static_cast<size_t>(dim), 0.0);
  sc.std_dev.assign(static_cast<size_t>(dim), 0.0);
  for (const auto& [ptr, rows] : blocks) {
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < dim; ++c) sc.mean[static_cast<size_t>(c)] += ptr[r * row_stride + c];
  }
  for (int64_t c = 0; c < dim; ++c) sc.mean[static_cast<size_t>(c)] /= static_cast<double>(count);
  for (const auto& [ptr, rows] : blocks) {
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < dim; ++c) {
        const double d = ptr[r * row_stride + c] - sc.mean[static_cast<size_t>(c)];
        sc.std_dev[static_cast<size_t>(c)] += d * d;
      }
    }
  }
  for (int64_t c = 0; c < dim; ++c)
    sc.std_dev[static_cast<size_t>(c)] =
        std::sqrt(sc.std_dev[static_cast<size_t>(c)] / static_cast<double>(count));
  return sc;
}

}  // namespace

FeatureScaler fit_scaler(const std::vector<const ComputationGraph*>& graphs) {
  std::vector<std::pair<const double*, int64_t>> blocks;
  for (const ComputationGraph* g : graphs) blocks.emplace_back(g->node_feat.data(), g->n_nodes());
  FeatureScaler sc = fit_columns(blocks, kNodeFeatDim, kNumericFeatDim);
  for (const ComputationGraph* g : graphs) sc.fitted_on.push_back(g->graph_id);
  return sc;
}

FeatureScaler fit_config_scaler(const std::vector<const ConfigurationSet*>& sets,
                                const std::vector<std::string>& ids) {
  std::vector<std::pair<const double*, int64_t>> blocks;
  for (const ConfigurationSet* s : sets) blocks.emplace_back(s->tile_feats.data(), s->n_configs());
  FeatureScaler sc = fit_columns(blocks, kTileFeatDim, kTileFeatDim);
  sc.fitted_on = ids;
  return sc;
}

void preprocess_dataset(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                        const PreprocessOptions& options) {
  Dataset ds = load_dataset(in_dir);
  const bool tile = ds.manifest.kind.is_tile();

  for (LoadedGraph& lg : ds.graphs) {
    if (!tile) {
      repad_node_feat(lg.graph);
      if (options.prune) {
        PrunedGraph pg = prune(lg.graph);
        lg.graph = std::move(pg.graph);
        lg.node_origin = std::move(pg.node_origin);
        lg.pruned = true;
        if (lg.graph.n_nodes() == 0)
          TGRAPH_LOG_WARN("graph '%s' has no configurable nodes; pruned to empty",
                          lg.graph.graph_id.c_str());
      }
    }
    if (options.dedup) lg.configs = dedup(lg.configs);
    lg.stored_compressed = !tile;  // compressed is the at-rest format
  }

  DatasetManifest manifest = ds.manifest;
  manifest.preprocessed = true;
  manifest.dedup_applied = options.dedup;
  {
    // Dataset-level statistics; per-fold training refits on its own fold.
    std::vector<const ComputationGraph*> gs;
    for (const LoadedGraph& lg : ds.graphs)
      if (lg.graph.n_nodes() > 0) gs.push_back(&lg.graph);
    if (gs.empty()) throw ValidationError("preprocess: no nonempty graphs in dataset");
    FeatureScaler sc = fit_scaler(gs);
    manifest.scaler_mean = sc.mean;
    manifest.scaler_std = sc.std_dev;
  }
  if (tile) {
    std::vector<const ConfigurationSet*> sets;
    std::vector<std::string> ids;
    for (const LoadedGraph& lg : ds.graphs) {
      sets.push_back(&lg.configs);
      ids.push_back(lg.graph.graph_id);
    }
    FeatureScaler sc = fit_config_scaler(sets, ids);
    manifest.config_scaler_mean = sc.mean;
    manifest.config_scaler_std = sc.std_dev;
  }

  save_manifest(manifest, out_dir);
  const auto split_dir = out_dir / manifest.kind.dir_name() / "train";
  std::filesystem::create_directories(split_dir);
  for (const LoadedGraph& lg : ds.graphs)
    save_graph(lg, split_dir / (lg.graph.graph_id + ".json"));
}

}  // namespace tgraph
