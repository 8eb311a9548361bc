// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tgraph/preprocess.hpp"
#include "tgraph/rng.hpp"

namespace tgraph {

using nlohmann::json;

std::string to_string(Collection c) {
  switch (c) {
    case Collection::layout_random: return "layout_random";
    case Collection::layout_default: return "layout_default";
    case Collection::tile: return "tile";
  }
  throw ValidationError("unknown collection");
}

std::string to_string(Group g) { return g == Group::xla ? "xla" : "nlp"; }

Collection collection_from_string(const std::string& s) {
  if (s == "layout_random") return Collection::layout_random;
  if (s == "layout_default") return Collection::layout_default;
  if (s == "tile") return Collection::tile;
  throw SchemaError("kind.collection: unknown value '" + s + "'");
}

Group group_from_string(const std::string& s) {
  if (s == "xla") return Group::xla;
  if (s == "nlp") return Group::nlp;
  throw SchemaError("kind.group: unknown value '" + s + "'");
}

std::string CollectionKind::dir_name() const {
  if (is_tile()) return "tile-" + to_string(group);
  const std::string strategy =
      collection == Collection::layout_random ? "random" : "default";
  return "layout-" + to_string(group) + "-" + strategy;
}

void ComputationGraph::validate() const {
  const int64_t n = n_nodes();
  if (static_cast<int64_t>(node_feat.size()) != n * kNodeFeatDim)
    throw ValidationError("graph '" + graph_id + "': node_feat must have exactly 140 entries per node");
  for (double v : node_feat) {
    if (!std::isfinite(v))
      throw ValidationError("graph '" + graph_id + "': node_feat entries must be finite");
  }
  for (int64_t i = 0; i < n; ++i) {
    const double* row = feat_row(i);
    for (int64_t s = kNumericFeatDim; s < kNodeFeatDim; ++s) {
      const double v = row[s];
      if (v != std::floor(v) || v < -1.0 || v > 5.0)
        throw ValidationError("graph '" + graph_id +
                              "': node_feat layout slots must be integers in {-1..5}");
    }
  }
  for (const auto& [src, dst] : edges) {
    if (src < 0 || src >= n || dst < 0 || dst >= n)
      throw ValidationError("graph '" + graph_id + "': edge endpoint out of range");
  }
  for (size_t i = 0; i < configurable_nodes.size(); ++i) {
    const int32_t c = configurable_nodes[i];
    if (c < 0 || c >= n)
      throw ValidationError("graph '" + graph_id + "': configurable node index out of range");
    if (i > 0 && configurable_nodes[i - 1] >= c)
      throw ValidationError("graph '" + graph_id +
                            "': configurable_nodes must be strictly increasing");
  }
  if (!node_output_ranks.empty()) {
    if (static_cast<int64_t>(node_output_ranks.size()) != n)
      throw ValidationError("graph '" + graph_id + "': node_output_ranks must have one entry per node");
    for (int32_t r : node_output_ranks) {
      if (r < 0 || r > 6)
        throw ValidationError("graph '" + graph_id + "': node_output_ranks entries must be in 0..6");
    }
  }
}

void LayoutConfig::validate() const {
  for (const auto& vec : axes) {
    bool seen_pad = false;
    for (int8_t v : vec) {
      if (v < -1 || v > 5) throw ValidationError("layout entries must be in {-1..5}");
      if (v == -1) {
        seen_pad = true;
      } else if (seen_pad) {
        throw ValidationError("layout padding must be a contiguous suffix");
      }
    }
  }
}

void ConfigurationSet::validate() const {
  const int64_t n = n_configs();
  if (n < 1) throw ValidationError("at least one configuration required");
  for (int64_t rt : runtimes_ns) {
    if (rt < 0) throw ValidationError("runtimes_ns must be nonnegative");
  }
  if (is_tile) {
    if (static_cast<int64_t>(tile_feats.size()) != n * kTileFeatDim)
      throw ValidationError("tile config_feat must have 24 entries per configuration");
    for (double v : tile_feats) {
      if (!std::isfinite(v)) throw ValidationError("tile config_feat entries must be finite");
    }
  } else {
    if (static_cast<int64_t>(layout_codes.size()) != n * n_config_nodes * 3)
      throw ValidationError("configs and runtimes_ns must have equal length");
    for (int32_t code : layout_codes) {
      if (code < 0 || code >= kLayoutCodeBound)
        throw ValidationError("compressed layout code out of range");
      const auto vec = decompress_layout(code);
      bool seen_pad = false;
      for (int8_t v : vec) {
        if (v == -1) {
          seen_pad = true;
        } else if (seen_pad) {
          throw ValidationError("layout padding must be a contiguous suffix");
        }
      }
    }
  }
}

namespace {

const json& require_field(const json& j, const char* name, const std::string& ctx) {
  auto it = j.find(name);
  if (it == j.end()) throw SchemaError(ctx + ": missing field '" + name + "'");
  return *it;
}

template <typename T>
T field_as(const json& j, const char* name, const std::string& ctx) {
  try {
    return require_field(j, name, ctx).get<T>();
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(ctx + ": field '" + name + "': " + e.what());
  }
}

json kind_to_json(const CollectionKind& kind) {
  return json{{"collection", to_string(kind.collection)}, {"group", to_string(kind.group)}};
}

CollectionKind kind_from_json(const json& j, const std::string& ctx) {
  CollectionKind kind;
  kind.collection = collection_from_string(field_as<std::string>(j, "collection", ctx + ".kind"));
  kind.group = group_from_string(field_as<std::string>(j, "group", ctx + ".kind"));
  return kind;
}

json layout_vec_to_json(const std::array<int8_t, 6>& vec) {
  json arr = json::array();
  for (int8_t v : vec) arr.push_back(static_cast<int>(v));
  return arr;
}

std::array<int8_t, 6> layout_vec_from_json(const json& arr, const std::string& ctx) {
  if (!arr.is_array() || arr.size() != 6)
    throw SchemaError(ctx + ": layout vector must have 6 entries");
  std::array<int8_t, 6> vec{};
  for (size_t i = 0; i < 6; ++i) {
    if (!arr[i].is_number_integer()) throw SchemaError(ctx + ": layout entry must be an integer");
    vec[i] = static_cast<int8_t>(arr[i].get<int>());
  }
  return vec;
}

}  // namespace

LoadedGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  const std::string ctx = path.filename().string();

  LoadedGraph lg;
  lg.kind = kind_from_json(require_field(j, "kind", ctx), ctx);
  ComputationGraph& g = lg.graph;
  g.graph_id = field_as<std::string>(j, "graph_id", ctx);
  g.opcodes = field_as<std::vector<int32_t>>(j, "opcodes", ctx);

  const json& feat = require_field(j, "node_feat", ctx);
  if (!feat.is_array() || feat.size() != g.opcodes.size())
    throw SchemaError(ctx + ": node_feat: expected one 140-array per node");
  g.node_feat.reserve(feat.size() * kNodeFeatDim);
  for (size_t i = 0; i < feat.size(); ++i) {
    const json& row = feat[i];
    if (!row.is_array() || static_cast<int64_t>(row.size()) != kNodeFeatDim)
      throw SchemaError(ctx + ": node_feat[" + std::to_string(i) + "]: expected 140 entries");
    for (const json& v : row) g.node_feat.push_back(v.get<double>());
  }

  const json& edges = require_field(j, "edges", ctx);
  for (size_t i = 0; i < edges.size(); ++i) {
    const json& e = edges[i];
    if (!e.is_array() || e.size() != 2)
      throw SchemaError(ctx + ": edges[" + std::to_string(i) + "]: expected [src, dst]");
    g.edges.emplace_back(e[0].get<int32_t>(), e[1].get<int32_t>());
  }
  g.configurable_nodes = field_as<std::vector<int32_t>>(j, "configurable_nodes", ctx);

  if (j.contains("node_output_ranks"))
    g.node_output_ranks = field_as<std::vector<int32_t>>(j, "node_output_ranks", ctx);
  else if (!lg.kind.is_tile())
    throw SchemaError(ctx + ": node_output_ranks is required for layout collections "
                            "(tensor-rank metadata)");

  ConfigurationSet& cs = lg.configs;
  cs.is_tile = lg.kind.is_tile();
  cs.runtimes_ns = field_as<std::vector<int64_t>>(j, "runtimes_ns", ctx);
  const int64_t n_cfg_nodes = static_cast<int64_t>(g.configurable_nodes.size());

  const bool has_raw = j.contains("configs");
  const bool has_compressed = j.contains("configs_compressed");
  if (has_raw == has_compressed)
    throw SchemaError(ctx + ": exactly one of configs/configs_compressed is required");
  lg.stored_compressed = has_compressed;

  if (cs.is_tile) {
    const json& cfgs = require_field(j, "configs", ctx);
    if (cfgs.size() != cs.runtimes_ns.size())
      throw ValidationError(ctx + ": configs and runtimes_ns must have equal length");
    for (const json& row : cfgs) {
      if (!row.is_array() || static_cast<int64_t>(row.size()) != kTileFeatDim)
        throw SchemaError(ctx + ": tile configs must be 24-arrays");
      for (const json& v : row) cs.tile_feats.push_back(v.get<double>());
    }
  } else {
    cs.n_config_nodes = n_cfg_nodes;
    const json& cfgs = has_raw ? j["configs"] : j["configs_compressed"];
    if (cfgs.size() != cs.runtimes_ns.size())
      throw ValidationError(ctx + ": configs and runtimes_ns must have equal length");
    cs.layout_codes.reserve(cfgs.size() * static_cast<size_t>(n_cfg_nodes) * 3);
    for (size_t ci = 0; ci < cfgs.size(); ++ci) {
      const json& per_node = cfgs[ci];
      if (static_cast<int64_t>(per_node.size()) != n_cfg_nodes)
        throw ValidationError(ctx + ": configuration node count does not match configurable_nodes");
      for (const json& nodecfg : per_node) {
        if (has_raw) {
          if (!nodecfg.is_array() || nodecfg.size() != 3)
            throw SchemaError(ctx + ": per-node config must hold [output, input, kernel]");
          LayoutConfig lc;
          for (size_t a = 0; a < 3; ++a) lc.axes[a] = layout_vec_from_json(nodecfg[a], ctx);
          lc.validate();
          for (size_t a = 0; a < 3; ++a) cs.layout_codes.push_back(compress_layout(lc.axes[a]));
        } else {
          if (!nodecfg.is_array() || nodecfg.size() != 3)
            throw SchemaError(ctx + ": compressed per-node config must hold 3 codes");
          for (const json& code : nodecfg) cs.layout_codes.push_back(code.get<int32_t>());
        }
      }
    }
  }

  if (j.contains("node_origin"))
    lg.node_origin = field_as<std::vector<int32_t>>(j, "node_origin", ctx);
  lg.pruned = j.value("pruned", false);

  g.validate();
  cs.validate();
  return lg;
}

void save_graph(const LoadedGraph& lg, const std::filesystem::path& path) {
  lg.graph.validate();
  lg.configs.validate();
  json j;
  j["graph_id"] = lg.graph.graph_id;
  j["kind"] = kind_to_json(lg.kind);
  j["opcodes"] = lg.graph.opcodes;
  json feat = json::array();
  for (int64_t i = 0; i < lg.graph.n_nodes(); ++i) {
    json row = json::array();
    const double* r = lg.graph.feat_row(i);
    for (int64_t c = 0; c < kNodeFeatDim; ++c) row.push_back(r[c]);
    feat.push_back(std::move(row));
  }
  j["node_feat"] = std::move(feat);
  if (!lg.graph.node_output_ranks.empty()) j["node_output_ranks"] = lg.graph.node_output_ranks;
  json edges = json::array();
  for (const auto& [s, d] : lg.graph.edges) edges.push_back(json::array({s, d}));
  j["edges"] = std::move(edges);
  j["configurable_nodes"] = lg.graph.configurable_nodes;
  j["runtimes_ns"] = lg.configs.runtimes_ns;

  const ConfigurationSet& cs = lg.configs;
  if (cs.is_tile) {
    json cfgs = json::array();
    for (int64_t ci = 0; ci < cs.n_configs(); ++ci) {
      json row = json::array();
      const double* r = cs.tile_row(ci);
      for (int64_t k = 0; k < kTileFeatDim; ++k) row.push_back(r[k]);
      cfgs.push_back(std::move(row));
    }
    j["configs"] = std::move(cfgs);
  } else if (lg.stored_compressed) {
    json cfgs = json::array();
    for (int64_t ci = 0; ci < cs.n_configs(); ++ci) {
      json per_node = json::array();
      const int32_t* codes = cs.codes_row(ci);
      for (int64_t ni = 0; ni < cs.n_config_nodes; ++ni)
        per_node.push_back(json::array({codes[ni * 3], codes[ni * 3 + 1], codes[ni * 3 + 2]}));
      cfgs.push_back(std::move(per_node));
    }
    j["configs_compressed"] = std::move(cfgs);
  } else {
    json cfgs = json::array();
    for (int64_t ci = 0; ci < cs.n_configs(); ++ci) {
      json per_node = json::array();
      const int32_t* codes = cs.codes_row(ci);
      for (int64_t ni = 0; ni < cs.n_config_nodes; ++ni) {
        json triple = json::array();
        for (int64_t a = 0; a < 3; ++a)
          triple.push_back(layout_vec_to_json(decompress_layout(codes[ni * 3 + a])));
        per_node.push_back(std::move(triple));
      }
      cfgs.push_back(std::move(per_node));
    }
    j["configs"] = std::move(cfgs);
  }
  if (!lg.node_origin.empty()) j["node_origin"] = lg.node_origin;
  if (lg.pruned) j["pruned"] = true;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  const std::string ctx = "manifest.json";
  DatasetManifest m;
  m.kind = kind_from_json(require_field(j, "kind", ctx), ctx);
  m.v_op = field_as<int64_t>(j, "v_op", ctx);
  m.feature_dim = field_as<int64_t>(j, "feature_dim", ctx);
  if (m.feature_dim != kNodeFeatDim)
    throw SchemaError(ctx + ": feature_dim must be 140");
  if (m.v_op < 1) throw ValidationError(ctx + ": v_op must be positive");
  m.preprocessed = j.value("preprocessed", false);
  m.dedup_applied = j.value("dedup_applied", false);
  if (j.contains("scaler")) {
    m.scaler_mean = j["scaler"]["mean"].get<std::vector<double>>();
    m.scaler_std = j["scaler"]["std"].get<std::vector<double>>();
  }
  if (j.contains("config_scaler")) {
    m.config_scaler_mean = j["config_scaler"]["mean"].get<std::vector<double>>();
    m.config_scaler_std = j["config_scaler"]["std"].get<std::vector<double>>();
  }
  if (j.contains("oracle")) {
    const json& o = j["oracle"];
    SyntheticOracle oracle;
    oracle.node_cost = o["node_cost"].get<std::vector<int64_t>>();
    if (o.contains("codes")) oracle.codes = o["codes"].get<std::vector<int32_t>>();
    if (o.contains("node_table"))
      oracle.node_table = o["node_table"].get<std::vector<std::vector<int64_t>>>();
    if (o.contains("interaction"))
      oracle.interaction = o["interaction"].get<std::vector<std::vector<int64_t>>>();
    if (o.contains("tile_weights"))
      oracle.tile_weights = o["tile_weights"].get<std::vector<double>>();
    m.oracle = std::move(oracle);
  }
  if (j.contains("generator")) m.generator_seed = j["generator"]["seed"].get<uint64_t>();
  return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& root) {
  json j;
  j["kind"] = kind_to_json(m.kind);
  j["v_op"] = m.v_op;
  j["feature_dim"] = m.feature_dim;
  j["preprocessed"] = m.preprocessed;
  j["dedup_applied"] = m.dedup_applied;
  if (!m.scaler_mean.empty())
    j["scaler"] = json{{"mean", m.scaler_mean}, {"std", m.scaler_std}};
  if (!m.config_scaler_mean.empty())
    j["config_scaler"] = json{{"mean", m.config_scaler_mean}, {"std", m.config_scaler_std}};
  if (m.oracle) {
    json o;
    o["node_cost"] = m.oracle->node_cost;
    if (!m.oracle->codes.empty()) o["codes"] = m.oracle->codes;
    if (!m.oracle->node_table.empty()) o["node_table"] = m.oracle->node_table;
    if (!m.oracle->interaction.empty()) o["interaction"] = m.oracle->interaction;
    if (!m.oracle->tile_weights.empty()) o["tile_weights"] = m.oracle->tile_weights;
    j["oracle"] = std::move(o);
  }
  if (m.generator_seed) j["generator"] = json{{"seed", *m.generator_seed}};
  std::filesystem::create_directories(root);
  const auto path = root / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& root) {
  Dataset ds;
  ds.root = root;
  ds.manifest = load_manifest(root);
  const auto coll_dir = root / ds.manifest.kind.dir_name();
  if (!std::filesystem::is_directory(coll_dir))
    throw IoError("collection directory missing: " + coll_dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& split : std::filesystem::directory_iterator(coll_dir)) {
    if (!split.is_directory()) continue;
    for (const auto& f : std::filesystem::directory_iterator(split.path())) {
      if (f.path().extension() == ".json") files.push_back(f.path());
    }
  }
  for (const auto& f : files) ds.graphs.push_back(load_graph(f));
  std::sort(ds.graphs.begin(), ds.graphs.end(),
            [](const LoadedGraph& a, const LoadedGraph& b) {
              return a.graph.graph_id < b.graph.graph_id;
            });
  for (const auto& g : ds.graphs) {
    for (int32_t op : g.graph.opcodes) {
      if (op < 0 || op >= ds.manifest.v_op)
        throw ValidationError("graph '" + g.graph.graph_id + "': opcode out of vocabulary");
    }
  }
  return ds;
}

void SynthParams::validate() const {
  if (nodes_min < 4) throw ValidationError("synth: nodes range must start at 4 or more");
  if (nodes_max < nodes_min) throw ValidationError("synth: empty nodes range");
  if (configs_per_graph < 2) throw ValidationError("synth: need at least 2 configs per graph");
  if (n_graphs < 1) throw ValidationError("synth: need at least 1 graph");
  if (v_op < 1 || v_op > 128) throw ValidationError("synth: v_op must be in 1..128");
  if (max_rank < 1 || max_rank > 4)
    throw ValidationError("synth: max_rank must be in 1..4 (interaction tables stay emittable)");
}

namespace {

// Layout vocabulary for the hidden runtime function: every axis permutation
// of ranks 1..max_rank, in enumeration order.
std::vector<std::array<int8_t, 6>> oracle_layout_vocabulary(int max_rank) {
  std::vector<std::array<int8_t, 6>> out;
  for (int rank = 1; rank <= max_rank; ++rank) {
    std::vector<int8_t> perm(static_cast<size_t>(rank));
    for (int i = 0; i < rank; ++i) perm[static_cast<size_t>(i)] = static_cast<int8_t>(i);
    do {
      std::array<int8_t, 6> vec;
      vec.fill(-1);
      std::copy(perm.begin(), perm.end(), vec.begin());
      out.push_back(vec);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return out;
}

int64_t code_index(const std::vector<int32_t>& codes, int32_t code) {
  for (size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] == code) return static_cast<int64_t>(i);
  }
  throw ValidationError("oracle: layout code not in vocabulary");
}

std::string graph_name(int64_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "g%03d", static_cast<int>(index));
  return buf;
}

}  // namespace

int64_t oracle_runtime(const SyntheticOracle& oracle, const LoadedGraph& g, int64_t config) {
  // Valid for raw (unpruned) synthetic graphs: the node-cost term sums over
  // every node of the emitted graph.
  int64_t total = 0;
  for (int32_t op : g.graph.opcodes) total += oracle.node_cost[static_cast<size_t>(op)];
  if (g.kind.is_tile()) {
    const double* x = g.configs.tile_row(config);
    double dot = 0.0;
    for (int64_t d = 0; d < kTileFeatDim; ++d) dot += oracle.tile_weights[static_cast<size_t>(d)] * x[d];
    return total + std::llround(dot);
  }
  const int32_t* codes = g.configs.codes_row(config);
  const auto& cfg_nodes = g.graph.configurable_nodes;
  std::vector<int64_t> node_code_idx(static_cast<size_t>(g.graph.n_nodes()), -1);
  for (size_t i = 0; i < cfg_nodes.size(); ++i) {
    const int64_t idx = code_index(oracle.codes, codes[i * 3]);  // output layout drives cost
    node_code_idx[static_cast<size_t>(cfg_nodes[i])] = idx;
    total += oracle.node_table[static_cast<size_t>(g.graph.opcodes[static_cast<size_t>(cfg_nodes[i])])]
                              [static_cast<size_t>(idx)];
  }
  for (const auto& [src, dst] : g.graph.edges) {
    const int64_t a = node_code_idx[static_cast<size_t>(src)];
    const int64_t b = node_code_idx[static_cast<size_t>(dst)];
    if (a >= 0 && b >= 0)
      total += oracle.interaction[static_cast<size_t>(a)][static_cast<size_t>(b)];
  }
  return total;
}

void generate_synthetic(const SynthParams& params, const std::filesystem::path& out_dir) {
  params.validate();
  const CollectionKind kind{params.collection, params.group};

  Rng table_rng(params.seed, "oracle-tables");
  SyntheticOracle oracle;
  oracle.node_cost.reserve(static_cast<size_t>(params.v_op));
  for (int64_t i = 0; i < params.v_op; ++i) oracle.node_cost.push_back(table_rng.next_in(500, 5000));
  std::vector<std::array<int8_t, 6>> vocab;
  if (!kind.is_tile()) {
    vocab = oracle_layout_vocabulary(static_cast<int>(params.max_rank));
    for (const auto& vec : vocab) oracle.codes.push_back(compress_layout(vec));
    oracle.node_table.assign(static_cast<size_t>(params.v_op),
                             std::vector<int64_t>(vocab.size()));
    for (auto& row : oracle.node_table)
      for (auto& v : row) v = table_rng.next_in(200, 3000);
    oracle.interaction.assign(vocab.size(), std::vector<int64_t>(vocab.size()));
    for (auto& row : oracle.interaction)
      for (auto& v : row) v = table_rng.next_in(0, 1500);
  } else {
    for (int64_t d = 0; d < kTileFeatDim; ++d)
      oracle.tile_weights.push_back(table_rng.next_uniform(0.0, 500.0));
  }

  DatasetManifest manifest;
  manifest.kind = kind;
  manifest.v_op = params.v_op;
  manifest.oracle = oracle;
  manifest.generator_seed = params.seed;
  save_manifest(manifest, out_dir);

  const auto split_dir = out_dir / kind.dir_name() / "train";
  std::filesystem::create_directories(split_dir);

  for (int64_t gi = 0; gi < params.n_graphs; ++gi) {
    Rng rng(params.seed, "graph", static_cast<uint64_t>(gi));
    LoadedGraph lg;
    lg.kind = kind;
    ComputationGraph& g = lg.graph;
    g.graph_id = graph_name(gi);
    const int64_t n = rng.next_in(params.nodes_min, params.nodes_max);

    for (int64_t i = 0; i < n; ++i)
      g.opcodes.push_back(static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(params.v_op))));
    for (int64_t i = 0; i < n; ++i)
      g.node_output_ranks.push_back(
          static_cast<int32_t>(1 + rng.next_below(static_cast<uint64_t>(params.max_rank))));
    if (!kind.is_tile()) {
      for (int64_t i = 0; i < n; ++i) {
        if (rng.next_double() < params.configurable_prob)
          g.configurable_nodes.push_back(static_cast<int32_t>(i));
      }
    }

    // DAG edges: every node after the first links to 1-2 earlier nodes
    // within a short window, keeping the graph weakly connected.
    for (int64_t i = 1; i < n; ++i) {
      const int64_t lo = std::max<int64_t>(0, i - 8);
      const int64_t n_parents = 1 + (rng.next_double() < 0.35 ? 1 : 0);
      int64_t prev = -1;
      for (int64_t p = 0; p < n_parents; ++p) {
        const int64_t parent = rng.next_in(lo, i - 1);
        if (parent == prev) continue;
        g.edges.emplace_back(static_cast<int32_t>(parent), static_cast<int32_t>(i));
        prev = parent;
      }
    }

    std::vector<bool> is_cfg(static_cast<size_t>(n), false);
    for (int32_t c : g.configurable_nodes) is_cfg[static_cast<size_t>(c)] = true;
    std::vector<int32_t> in_deg(static_cast<size_t>(n), 0), out_deg(static_cast<size_t>(n), 0);
    for (const auto& [s, d] : g.edges) {
      out_deg[static_cast<size_t>(s)]++;
      in_deg[static_cast<size_t>(d)]++;
    }

    g.node_feat.assign(static_cast<size_t>(n * kNodeFeatDim), 0.0);
    const int64_t onehot_width = std::min<int64_t>(params.v_op, 64);
    for (int64_t i = 0; i < n; ++i) {
      double* row = g.feat_row(i);
      row[0] = static_cast<double>(n);
      row[1] = static_cast<double>(out_deg[static_cast<size_t>(i)]);
      row[2] = static_cast<double>(in_deg[static_cast<size_t>(i)]);
      row[3] = static_cast<double>(g.node_output_ranks[static_cast<size_t>(i)]);
      row[4] = is_cfg[static_cast<size_t>(i)] ? 1.0 : 0.0;
      row[5 + std::min<int64_t>(g.opcodes[static_cast<size_t>(i)], onehot_width - 1)] = 1.0;
      // *_sum/*_product style large-magnitude column; a pure function of
      // structure so held-out graphs stay in distribution.
      row[70] = std::exp(0.5 * g.opcodes[static_cast<size_t>(i)] +
                         g.node_output_ranks[static_cast<size_t>(i)]);
      row[71] = 1.0;  // constant column
      // Output layout of the unconfigured compilation: identity order,
      // 0-padded as in the upstream format; repad turns padding into -1.
      const int32_t rank = g.node_output_ranks[static_cast<size_t>(i)];
      for (int32_t a = 0; a < rank; ++a) row[kNumericFeatDim + a] = static_cast<double>(a);
    }

    ConfigurationSet& cs = lg.configs;
    cs.is_tile = kind.is_tile();
    const bool focus_best = params.collection == Collection::layout_default;
    const int64_t n_draw = focus_best ? params.configs_per_graph * 5 : params.configs_per_graph;

    struct Drawn {
      std::vector<int32_t> codes;
      std::vector<double> feats;
      int64_t runtime;
    };
    std::vector<Drawn> drawn;
    drawn.reserve(static_cast<size_t>(n_draw));
    for (int64_t ci = 0; ci < n_draw; ++ci) {
      Drawn d;
      if (cs.is_tile) {
        d.feats.reserve(kTileFeatDim);
        for (int64_t k = 0; k < kTileFeatDim; ++k) d.feats.push_back(rng.next_double());
      } else {
        for (int32_t node : g.configurable_nodes) {
          const int32_t rank = g.node_output_ranks[static_cast<size_t>(node)];
          std::vector<int8_t> perm(static_cast<size_t>(rank));
          for (int32_t a = 0; a < rank; ++a) perm[static_cast<size_t>(a)] = static_cast<int8_t>(a);
          rng.shuffle(perm);
          std::array<int8_t, 6> out_vec, in_vec, ker_vec;
          out_vec.fill(-1);
          in_vec.fill(-1);
          ker_vec.fill(-1);
          for (int32_t a = 0; a < rank; ++a) {
            out_vec[static_cast<size_t>(a)] = perm[static_cast<size_t>(a)];
            in_vec[static_cast<size_t>(a)] = perm[static_cast<size_t>(rank - 1 - a)];
            ker_vec[static_cast<size_t>(a)] = perm[static_cast<size_t>(a)];
          }
          d.codes.push_back(compress_layout(out_vec));
          d.codes.push_back(compress_layout(in_vec));
          d.codes.push_back(compress_layout(ker_vec));
        }
      }
      drawn.push_back(std::move(d));
    }

    cs.n_config_nodes = static_cast<int64_t>(g.configurable_nodes.size());
    // Compute runtimes via the shared recompute path, staging configs first.
    for (auto& d : drawn) {
      LoadedGraph probe;
      probe.kind = kind;
      probe.graph = g;
      probe.configs.is_tile = cs.is_tile;
      probe.configs.n_config_nodes = cs.n_config_nodes;
      probe.configs.layout_codes = d.codes;
      probe.configs.tile_feats = d.feats;
      probe.configs.runtimes_ns = {0};
      d.runtime = oracle_runtime(oracle, probe, 0);
    }

    std::vector<int64_t> keep(static_cast<size_t>(n_draw));
    for (int64_t i = 0; i < n_draw; ++i) keep[static_cast<size_t>(i)] = i;
    if (focus_best) {
      // Default-style collections concentrate samples near the optimum.
      std::stable_sort(keep.begin(), keep.end(), [&](int64_t a, int64_t b) {
        return drawn[static_cast<size_t>(a)].runtime < drawn[static_cast<size_t>(b)].runtime;
      });
      keep.resize(static_cast<size_t>(params.configs_per_graph));
      std::sort(keep.begin(), keep.end());  // restore draw order
    }
    for (int64_t idx : keep) {
      const Drawn& d = drawn[static_cast<size_t>(idx)];
      cs.layout_codes.insert(cs.layout_codes.end(), d.codes.begin(), d.codes.end());
      cs.tile_feats.insert(cs.tile_feats.end(), d.feats.begin(), d.feats.end());
      cs.runtimes_ns.push_back(d.runtime);
    }

    lg.stored_compressed = false;  // raw form on disk, like the upstream data
    save_graph(lg, split_dir / (g.graph_id + ".json"));
  }
}

}  // namespace tgraph
