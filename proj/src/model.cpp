// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "tgraph/rng.hpp"

namespace tgraph {

using nlohmann::json;

void ModelConfig::validate() const {
  if (hidden_dim < 2 || hidden_dim % 2 != 0)
    throw ValidationError("model: hidden_dim must be even and positive");
  if ((hidden_dim / 2) % se_reduction != 0)
    throw ValidationError("model: hidden_dim/2 must be divisible by se_reduction");
  if (n_blocks < 1) throw ValidationError("model: need at least one block");
  if (opcode_embed_dim < 1 || layout_embed_dim < 1)
    throw ValidationError("model: embedding dims must be positive");
  if (v_op < 1) throw ValidationError("model: opcode vocabulary size not set");
}

int64_t ModelConfig::input_dim() const {
  int64_t dim = kNumericFeatDim + kLayoutSlotDim * layout_embed_dim + opcode_embed_dim;
  if (mode == Mode::layout) dim += kConfigSlotDim * layout_embed_dim;
  return dim;
}

int64_t ModelConfig::head_input_dim() const {
  return mode == Mode::tile ? hidden_dim + kTileFeatDim : hidden_dim;
}

size_t TGraphModel::param_index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("model: unknown parameter '" + name + "'");
  return it->second;
}

void TGraphModel::rebuild_index() {
  index_.clear();
  for (size_t i = 0; i < params.size(); ++i) index_[params[i].name] = i;
}

int64_t TGraphModel::parameter_count() const {
  int64_t n = 0;
  for (const Param& p : params)
    if (p.learnable) n += p.value.numel();
  return n;
}

namespace {

void add_dense(TGraphModel& m, Rng& rng, const std::string& name, int64_t in, int64_t out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w({in, out});
  for (auto& v : w.data) v = rng.next_uniform(-bound, bound);
  Tensor b({out});
  for (auto& v : b.data) v = rng.next_uniform(-bound, bound);
  m.params.push_back({name + ".w", std::move(w), true, true});
  m.params.push_back({name + ".b", std::move(b), true, false});
}

void add_embedding(TGraphModel& m, Rng& rng, const std::string& name, int64_t rows, int64_t dim) {
  Tensor t({rows, dim});
  for (auto& v : t.data) v = 0.02 * rng.next_normal();
  m.params.push_back({name, std::move(t), true, true});
}

}  // namespace

TGraphModel TGraphModel::init(const ModelConfig& config, uint64_t seed) {
  config.validate();
  TGraphModel m;
  m.config = config;
  m.init_seed = seed;
  Rng rng(seed, "model-init");
  const int64_t c = config.hidden_dim;
  const int64_t half = c / 2;

  add_embedding(m, rng, "embed.layout", 7, config.layout_embed_dim);
  add_embedding(m, rng, "embed.opcode", config.v_op, config.opcode_embed_dim);
  add_dense(m, rng, "f_in.l1", config.input_dim(), c);
  add_dense(m, rng, "f_in.l2", c, c);
  for (int64_t k = 1; k <= config.n_blocks; ++k) {
    const std::string prefix = "block" + std::to_string(k) + ".";
    Tensor gamma({c});
    std::fill(gamma.data.begin(), gamma.data.end(), 1.0);
    m.params.push_back({prefix + "norm.gamma", std::move(gamma), true, true});
    m.params.push_back({prefix + "norm.beta", Tensor({c}), true, false});
    add_dense(m, rng, prefix + "f1", c, half);
    add_dense(m, rng, prefix + "f2", c + half, half);
    if (config.use_self_attention) {
      add_dense(m, rng, prefix + "se.excitation", half, half / config.se_reduction);
      add_dense(m, rng, prefix + "se.squeeze", half / config.se_reduction, half);
    }
    if (config.use_cross_attention) {
      // temperature stored as log so T = exp(log_t) stays positive
      m.params.push_back({prefix + "log_temperature", Tensor::scalar(0.0), true, false});
    }
  }
  add_dense(m, rng, "f_out", config.head_input_dim(), 1);
  m.rebuild_index();
  return m;
}

BatchInput make_batch_input(const LoadedGraph& g, const FeatureScaler& scaler,
                            const FeatureScaler* config_scaler,
                            const std::vector<int64_t>& config_indices) {
  if (scaler.dim() != kNumericFeatDim)
    throw ValidationError("make_batch_input: scaler must cover the 134 numeric features");
  const ComputationGraph& graph = g.graph;
  const ConfigurationSet& cs = g.configs;
  if (!cs.is_tile && cs.n_config_nodes != static_cast<int64_t>(graph.configurable_nodes.size()))
    throw ValidationError("graph '" + graph.graph_id + "': missing config for configurable node");

  BatchInput b;
  b.n_nodes = graph.n_nodes();
  b.n_configs = static_cast<int64_t>(config_indices.size());
  b.opcodes.assign(graph.opcodes.begin(), graph.opcodes.end());

  b.numeric_scaled.resize(static_cast<size_t>(b.n_nodes * kNumericFeatDim));
  b.node_slot_idx.resize(static_cast<size_t>(b.n_nodes * kLayoutSlotDim));
  for (int64_t i = 0; i < b.n_nodes; ++i) {
    const double* row = graph.feat_row(i);
    scaler.apply_row(row, b.numeric_scaled.data() + i * kNumericFeatDim);
    for (int64_t s = 0; s < kLayoutSlotDim; ++s)
      b.node_slot_idx[static_cast<size_t>(i * kLayoutSlotDim + s)] =
          static_cast<int64_t>(row[kNumericFeatDim + s]) + 1;
  }

  for (const auto& [src, dst] : graph.edges) {
    b.edge_srcs.push_back(src);
    b.edge_dsts.push_back(dst);
    b.edge_srcs.push_back(dst);
    b.edge_dsts.push_back(src);
  }
  b.config_positions.assign(graph.configurable_nodes.begin(), graph.configurable_nodes.end());

  for (int64_t ci : config_indices) {
    if (ci < 0 || ci >= cs.n_configs())
      throw ValidationError("make_batch_input: configuration index out of range");
    b.runtimes.push_back(static_cast<double>(cs.runtimes_ns[static_cast<size_t>(ci)]));
    if (cs.is_tile) {
      const double* row = cs.tile_row(ci);
      double scaled[kTileFeatDim];
      if (config_scaler && !config_scaler->empty()) {
        config_scaler->apply_row(row, scaled);
      } else {
        std::memcpy(scaled, row, sizeof(scaled));
      }
      b.tile_feats_scaled.insert(b.tile_feats_scaled.end(), scaled, scaled + kTileFeatDim);
    } else {
      const int32_t* codes = cs.codes_row(ci);
      for (int64_t node = 0; node < cs.n_config_nodes; ++node) {
        for (int64_t a = 0; a < 3; ++a) {
          const auto vec = decompress_layout(codes[node * 3 + a]);
          for (int8_t v : vec) b.config_slot_idx.push_back(static_cast<int64_t>(v) + 1);
        }
      }
    }
  }
  return b;
}

BoundParams bind_params(Tape& tape, const TGraphModel& model, bool with_grads) {
  BoundParams bound;
  bound.model = &model;
  bound.vars.reserve(model.params.size());
  for (const Param& p : model.params)
    bound.vars.push_back(tape.leaf(p.value, with_grads && p.learnable));
  return bound;
}

Var assemble_features(Tape& tape, const BoundParams& bound, const BatchInput& batch) {
  const ModelConfig& cfg = bound.model->config;
  const int64_t b = batch.n_configs;
  const int64_t n = batch.n_nodes;
  const int64_t m = static_cast<int64_t>(batch.config_positions.size());
  const int64_t d = cfg.layout_embed_dim;
  if (b < 1) throw ValidationError("assemble_features: empty configuration batch");
  if (n < 1) throw ValidationError("assemble_features: empty graph");

  Var numeric = tape.leaf(Tensor({n, kNumericFeatDim}, batch.numeric_scaled));
  Var parts_numeric = expand_leading(numeric, b);

  Var node_slots = embedding_lookup(bound.at("embed.layout"), batch.node_slot_idx,
                                    {n * kLayoutSlotDim});
  Var parts_node = expand_leading(reshape(node_slots, {n, kLayoutSlotDim * d}), b);

  Var parts_opcode =
      expand_leading(embedding_lookup(bound.at("embed.opcode"), batch.opcodes, {n}), b);

  if (cfg.mode == ModelConfig::Mode::tile)
    return concat({parts_numeric, parts_node, parts_opcode}, -1);

  Var parts_config;
  if (m > 0) {
    if (static_cast<int64_t>(batch.config_slot_idx.size()) != b * m * kConfigSlotDim)
      throw ValidationError("assemble_features: missing config for configurable node");
    Var ce = embedding_lookup(bound.at("embed.layout"), batch.config_slot_idx,
                              {b * m * kConfigSlotDim});
    ce = reshape(ce, {b, m, kConfigSlotDim * d});
    parts_config = segment_sum(ce, batch.config_positions, n);
  } else {
    parts_config = tape.leaf(Tensor({b, n, kConfigSlotDim * d}));  // zeros
  }
  return concat({parts_numeric, parts_node, parts_config, parts_opcode}, -1);
}

Var conv_block(const Var& eps, const std::vector<int64_t>& edge_srcs,
               const std::vector<int64_t>& edge_dsts, int64_t n_nodes, const ConvBlockVars& vars,
               bool use_self_attention, bool use_cross_attention, bool use_edges) {
  const int64_t b = eps->value.dim(0);
  const int64_t half = vars.f1_w->value.dim(1);
  Var h = instance_norm(eps, vars.norm_gamma, vars.norm_beta, 1e-5);
  Var f1h = add(matmul(h, vars.f1_w), vars.f1_b);
  Var neighbor_sum;
  if (use_edges && !edge_srcs.empty()) {
    neighbor_sum = segment_sum(gather_rows(f1h, edge_srcs), edge_dsts, n_nodes);
  } else {
    neighbor_sum = eps->tape->leaf(Tensor({b, n_nodes, half}));  // isolated / edge ablation
  }
  Var s = l2_normalize(add(matmul(concat({h, neighbor_sum}, -1), vars.f2_w), vars.f2_b), -1,
                       1e-12);
  Var eta = s;
  if (use_self_attention) {
    Var gate = sigmoid(add(
        matmul(relu(add(matmul(s, vars.se_excitation_w), vars.se_excitation_b)),
               vars.se_squeeze_w),
        vars.se_squeeze_b));
    eta = mul(s, gate);
  }
  Var across = eta;
  if (use_cross_attention) {
    Var temperature = exp(vars.log_temperature);
    across = mul(eta, softmax(eta, 0, temperature));
  }
  return add(eps, gelu(concat({eta, across}, -1)));
}

Var model_forward(Tape& tape, const BoundParams& bound, const BatchInput& batch) {
  const ModelConfig& cfg = bound.model->config;
  const int64_t b = batch.n_configs;
  const int64_t n = batch.n_nodes;

  Var x = assemble_features(tape, bound, batch);
  Var eps = gelu(add(matmul(x, bound.at("f_in.l1.w")), bound.at("f_in.l1.b")));
  eps = gelu(add(matmul(eps, bound.at("f_in.l2.w")), bound.at("f_in.l2.b")));

  for (int64_t k = 1; k <= cfg.n_blocks; ++k) {
    const std::string prefix = "block" + std::to_string(k) + ".";
    ConvBlockVars vars;
    vars.norm_gamma = bound.at(prefix + "norm.gamma");
    vars.norm_beta = bound.at(prefix + "norm.beta");
    vars.f1_w = bound.at(prefix + "f1.w");
    vars.f1_b = bound.at(prefix + "f1.b");
    vars.f2_w = bound.at(prefix + "f2.w");
    vars.f2_b = bound.at(prefix + "f2.b");
    if (cfg.use_self_attention) {
      vars.se_excitation_w = bound.at(prefix + "se.excitation.w");
      vars.se_excitation_b = bound.at(prefix + "se.excitation.b");
      vars.se_squeeze_w = bound.at(prefix + "se.squeeze.w");
      vars.se_squeeze_b = bound.at(prefix + "se.squeeze.b");
    }
    if (cfg.use_cross_attention) vars.log_temperature = bound.at(prefix + "log_temperature");
    eps = conv_block(eps, batch.edge_srcs, batch.edge_dsts, n, vars, cfg.use_self_attention,
                     cfg.use_cross_attention, cfg.use_edges);
  }

  Var pooled = mean(eps, 1);
  if (cfg.mode == ModelConfig::Mode::tile) {
    Var feats = tape.leaf(Tensor({b, kTileFeatDim}, batch.tile_feats_scaled));
    pooled = concat({pooled, feats}, -1);
  }
  return reshape(add(matmul(pooled, bound.at("f_out.w")), bound.at("f_out.b")), {b});
}

namespace {

constexpr char kMagic[8] = {'T', 'G', 'R', 'P', 'H', 'C', 'K', '1'};

json config_to_json(const ModelConfig& c) {
  return json{{"hidden_dim", c.hidden_dim},
              {"n_blocks", c.n_blocks},
              {"opcode_embed_dim", c.opcode_embed_dim},
              {"layout_embed_dim", c.layout_embed_dim},
              {"se_reduction", c.se_reduction},
              {"use_self_attention", c.use_self_attention},
              {"use_cross_attention", c.use_cross_attention},
              {"use_edges", c.use_edges},
              {"mode", c.mode == ModelConfig::Mode::tile ? "tile" : "layout"},
              {"v_op", c.v_op}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.hidden_dim = j.at("hidden_dim").get<int64_t>();
  c.n_blocks = j.at("n_blocks").get<int64_t>();
  c.opcode_embed_dim = j.at("opcode_embed_dim").get<int64_t>();
  c.layout_embed_dim = j.at("layout_embed_dim").get<int64_t>();
  c.se_reduction = j.at("se_reduction").get<int64_t>();
  c.use_self_attention = j.at("use_self_attention").get<bool>();
  c.use_cross_attention = j.at("use_cross_attention").get<bool>();
  c.use_edges = j.at("use_edges").get<bool>();
  c.mode = j.at("mode").get<std::string>() == "tile" ? ModelConfig::Mode::tile
                                                     : ModelConfig::Mode::layout;
  c.v_op = j.at("v_op").get<int64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const TGraphModel& model, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, const Tensor*>> extra;
  Tensor sc_mean({static_cast<int64_t>(model.scaler.mean.size())}, model.scaler.mean);
  Tensor sc_std({static_cast<int64_t>(model.scaler.std_dev.size())}, model.scaler.std_dev);
  Tensor cf_mean({static_cast<int64_t>(model.config_scaler.mean.size())},
                 model.config_scaler.mean);
  Tensor cf_std({static_cast<int64_t>(model.config_scaler.std_dev.size())},
                model.config_scaler.std_dev);
  extra.emplace_back("scaler.mean", &sc_mean);
  extra.emplace_back("scaler.std", &sc_std);
  if (cf_mean.numel() > 0) {
    extra.emplace_back("config_scaler.mean", &cf_mean);
    extra.emplace_back("config_scaler.std", &cf_std);
  }

  json header;
  header["format"] = 1;
  header["config"] = config_to_json(model.config);
  header["init_seed"] = model.init_seed;
  header["scaler_fitted_on"] = model.scaler.fitted_on;
  json tensors = json::array();
  for (const Param& p : model.params)
    tensors.push_back(json{{"name", p.name},
                           {"shape", p.value.shape},
                           {"learnable", p.learnable},
                           {"decay", p.decay}});
  for (const auto& [name, t] : extra)
    tensors.push_back(json{{"name", name}, {"shape", t->shape}, {"learnable", false},
                           {"decay", false}});
  header["tensors"] = std::move(tensors);
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const uint32_t len = static_cast<uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  auto write_tensor = [&out](const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  };
  for (const Param& p : model.params) write_tensor(p.value);
  for (const auto& [name, t] : extra) write_tensor(*t);
  if (!out) throw IoError("write failed: " + path.string());
}

TGraphModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw SchemaError(path.string() + ": not a tgraph checkpoint");
  uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header_str(len, '\0');
  in.read(header_str.data(), len);
  if (!in) throw SchemaError(path.string() + ": truncated header");
  json header;
  try {
    header = json::parse(header_str);
  } catch (const std::exception& e) {
    throw SchemaError(path.string() + ": header: " + e.what());
  }
  if (header.at("format").get<int>() != 1)
    throw SchemaError(path.string() + ": unsupported checkpoint format");

  TGraphModel model;
  model.config = config_from_json(header.at("config"));
  model.config.validate();
  model.init_seed = header.value("init_seed", uint64_t{0});
  model.scaler.fitted_on = header.value("scaler_fitted_on", std::vector<std::string>{});

  for (const json& tj : header.at("tensors")) {
    const std::string name = tj.at("name").get<std::string>();
    const auto shape = tj.at("shape").get<std::vector<int64_t>>();
    Tensor t{shape};
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw SchemaError(path.string() + ": truncated tensor '" + name + "'");
    if (name == "scaler.mean") {
      model.scaler.mean = std::move(t.data);
    } else if (name == "scaler.std") {
      model.scaler.std_dev = std::move(t.data);
    } else if (name == "config_scaler.mean") {
      model.config_scaler.mean = std::move(t.data);
    } else if (name == "config_scaler.std") {
      model.config_scaler.std_dev = std::move(t.data);
    } else {
      model.params.push_back(
          {name, std::move(t), tj.at("learnable").get<bool>(), tj.at("decay").get<bool>()});
    }
  }
  model.rebuild_index();
  return model;
}

}  // namespace tgraph
