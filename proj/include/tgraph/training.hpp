// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// AdamW, the warmup + lifted-cosine schedule, graph-level K-fold planning
// and the per-fold training loop.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tgraph/dataset.hpp"
#include "tgraph/model.hpp"

namespace tgraph {

struct TrainConfig {
  double lr_peak = 1e-3;
  double warmup_frac = 0.05;
  double lr_floor = 1e-5;  // the "lift" of the cosine schedule
  double weight_decay = 1e-5;
  double grad_clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double epochs = 0;             // <= 0: per-collection default; fractional allowed
  int64_t configs_per_batch = 0;  // <= 0: per-collection default
  int64_t k_folds = 20;
  int64_t folds_trained = 5;
  int64_t folds_kept = 4;
  int64_t val_every_epochs = 1;
  uint64_t seed = 1;

  void validate() const;
  // Clamps folds_trained/folds_kept under a smaller k_folds override.
  void normalize();
  static double default_epochs(const CollectionKind& kind);   // 1000 nlp / 750 xla / 17.5 tile
  static int64_t default_batch(const CollectionKind& kind);   // 128 random / 64 otherwise
  double resolved_epochs(const CollectionKind& kind) const;
  int64_t resolved_batch(const CollectionKind& kind) const;
};

struct FoldPlan {
  int64_t k = 0;
  std::vector<std::vector<std::string>> shards;  // fold -> validation graph ids

  const std::vector<std::string>& val_ids(int64_t fold) const;
  std::vector<std::string> train_ids(int64_t fold) const;
};

// Deterministic shuffle by seed, then k contiguous shards. Graph-level
// granularity: all configurations of a graph stay on one side.
FoldPlan make_folds(std::vector<std::string> graph_ids, int64_t k, uint64_t seed);

// Linear warmup to lr_peak, then cosine decay to lr_floor at total_steps.
double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg);

// Fold ids with the highest validation score, best first; ties keep the
// lower fold index.
std::vector<int64_t> select_folds(const std::vector<double>& val_scores, int64_t keep);

struct AdamWState {
  std::vector<Tensor> m, v;  // aligned with params
  int64_t t = 0;
};

// One AdamW update over the learnable parameters; decay only applies to
// parameters in the decay group. grads entries may be null (treated as 0).
void adamw_step(std::vector<Param>& params, const std::vector<const Tensor*>& grads,
                AdamWState& state, double lr, const TrainConfig& cfg);

// Scales grads so the global L2 norm is at most max_norm; returns the
// pre-clip norm.
double clip_global_norm(std::vector<Tensor*>& grads, double max_norm);

struct TrainResult {
  TGraphModel model;  // snapshot at the best validation score
  double best_val_tau = 0.0;
  int64_t best_epoch = -1;
  std::vector<double> val_history;
  int64_t total_steps = 0;
  int64_t trained_graphs = 0;
};

// Trains one fold. `log` (optional) receives JSON lines: per step
// {step, epoch, lr, loss, active_pairs}; per validation {step, epoch, tau_val}.
TrainResult train_fold(const Dataset& dataset, int64_t fold, const TrainConfig& cfg,
                       ModelConfig model_cfg, std::ostream* log);

}  // namespace tgraph
