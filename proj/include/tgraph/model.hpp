// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// The TGraph network: feature assembly, GraphSAGE blocks with channel-wise
// self-attention and cross-configuration attention, global pooling and the
// scoring head.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "tgraph/autodiff.hpp"
#include "tgraph/dataset.hpp"
#include "tgraph/preprocess.hpp"

namespace tgraph {

struct ModelConfig {
  enum class Mode { layout, tile };

  int64_t hidden_dim = 256;  // C; blocks run at C/2 internally
  int64_t n_blocks = 2;
  int64_t opcode_embed_dim = 16;
  int64_t layout_embed_dim = 4;
  int64_t se_reduction = 8;
  bool use_self_attention = true;
  bool use_cross_attention = true;
  bool use_edges = true;
  Mode mode = Mode::layout;
  int64_t v_op = 0;

  void validate() const;
  // scaled numeric (134) | node layout slots (6*d) | config slots (18*d,
  // layout mode only) | opcode embedding
  int64_t input_dim() const;
  int64_t head_input_dim() const;  // hidden_dim, +24 for tile late fusion
};

struct Param {
  std::string name;
  Tensor value;
  bool learnable = true;
  bool decay = true;  // weight-decay group; off for biases, shifts, temperature
};

struct TGraphModel {
  ModelConfig config;
  std::vector<Param> params;
  FeatureScaler scaler;         // node_feat[:134] statistics, fold-train fitted
  FeatureScaler config_scaler;  // tile config_feat statistics
  uint64_t init_seed = 0;

  static TGraphModel init(const ModelConfig& config, uint64_t seed);

  size_t param_index(const std::string& name) const;
  Param& param(const std::string& name) { return params[param_index(name)]; }
  const Param& param(const std::string& name) const { return params[param_index(name)]; }
  int64_t parameter_count() const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, size_t> index_;
};

// One graph plus a sampled configuration block, ready for the network.
struct BatchInput {
  int64_t n_configs = 0;
  int64_t n_nodes = 0;
  std::vector<int64_t> opcodes;
  std::vector<double> numeric_scaled;    // n_nodes x 134
  std::vector<int64_t> node_slot_idx;    // n_nodes x 6, embedding rows 0..6
  std::vector<int64_t> edge_srcs;        // undirected: both directions listed
  std::vector<int64_t> edge_dsts;
  std::vector<int64_t> config_positions;  // configurable node indices
  std::vector<int64_t> config_slot_idx;   // n_configs x n_cfg x 18, rows 0..6
  std::vector<double> tile_feats_scaled;  // n_configs x 24
  std::vector<double> runtimes;           // n_configs, ns
};

// Decompresses the selected configurations on the fly and applies the
// scaler to the numeric features.
BatchInput make_batch_input(const LoadedGraph& g, const FeatureScaler& scaler,
                            const FeatureScaler* config_scaler,
                            const std::vector<int64_t>& config_indices);

struct BoundParams {
  const TGraphModel* model = nullptr;
  std::vector<Var> vars;  // aligned with model->params
  const Var& at(const std::string& name) const { return vars[model->param_index(name)]; }
};

BoundParams bind_params(Tape& tape, const TGraphModel& model, bool with_grads);

// One graph convolutional block, exposed so the gradcheck suite can drive
// it directly. Optional members may be null when the matching attention is
// disabled.
struct ConvBlockVars {
  Var norm_gamma, norm_beta;
  Var f1_w, f1_b, f2_w, f2_b;
  Var se_excitation_w, se_excitation_b, se_squeeze_w, se_squeeze_b;
  Var log_temperature;
};

Var conv_block(const Var& eps, const std::vector<int64_t>& edge_srcs,
               const std::vector<int64_t>& edge_dsts, int64_t n_nodes, const ConvBlockVars& vars,
               bool use_self_attention, bool use_cross_attention, bool use_edges);

// (n_configs x n_nodes x input_dim); configuration copies differ only in
// the config-slot section.
Var assemble_features(Tape& tape, const BoundParams& bound, const BatchInput& batch);

// One score per configuration.
Var model_forward(Tape& tape, const BoundParams& bound, const BatchInput& batch);

// Single-file checkpoint: versioned header, named parameter tensors and the
// scalers; byte-stable for identical contents.
void save_checkpoint(const TGraphModel& model, const std::filesystem::path& path);
TGraphModel load_checkpoint(const std::filesystem::path& path);

}  // namespace tgraph
