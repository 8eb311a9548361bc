// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "tgraph/inference.hpp"
#include "tgraph/ranking.hpp"
#include "tgraph/rng.hpp"

namespace tgraph {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0))
    throw ValidationError("train: warmup_frac must be in (0, 1)");
  if (!(lr_peak > 0.0) || lr_floor < 0.0 || lr_floor > lr_peak)
    throw ValidationError("train: invalid learning rate range");
  if (grad_clip_norm <= 0.0) throw ValidationError("train: grad_clip_norm must be positive");
  if (k_folds < 1 || folds_trained < 1 || folds_kept < 1)
    throw ValidationError("train: fold counts must be positive");
  if (!(folds_kept <= folds_trained && folds_trained <= k_folds))
    throw ValidationError("train: need folds_kept <= folds_trained <= k_folds");
  if (val_every_epochs < 1) throw ValidationError("train: val_every_epochs must be positive");
}

void TrainConfig::normalize() {
  folds_trained = std::min(folds_trained, k_folds);
  folds_kept = std::min(folds_kept, folds_trained);
}

double TrainConfig::default_epochs(const CollectionKind& kind) {
  if (kind.is_tile()) return 17.5;
  return kind.group == Group::nlp ? 1000.0 : 750.0;
}

int64_t TrainConfig::default_batch(const CollectionKind& kind) {
  return kind.collection == Collection::layout_random ? 128 : 64;
}

double TrainConfig::resolved_epochs(const CollectionKind& kind) const {
  return epochs > 0.0 ? epochs : default_epochs(kind);
}

int64_t TrainConfig::resolved_batch(const CollectionKind& kind) const {
  return configs_per_batch > 0 ? configs_per_batch : default_batch(kind);
}

const std::vector<std::string>& FoldPlan::val_ids(int64_t fold) const {
  if (fold < 0 || fold >= k) throw ValidationError("fold index out of range");
  return shards[static_cast<size_t>(fold)];
}

std::vector<std::string> FoldPlan::train_ids(int64_t fold) const {
  if (fold < 0 || fold >= k) throw ValidationError("fold index out of range");
  std::vector<std::string> out;
  for (int64_t i = 0; i < k; ++i) {
    if (i == fold) continue;
    const auto& shard = shards[static_cast<size_t>(i)];
    out.insert(out.end(), shard.begin(), shard.end());
  }
  return out;
}

FoldPlan make_folds(std::vector<std::string> graph_ids, int64_t k, uint64_t seed) {
  if (static_cast<int64_t>(graph_ids.size()) < k)
    throw ValidationError("make_folds: too few graphs for " + std::to_string(k) + " folds");
  std::sort(graph_ids.begin(), graph_ids.end());
  Rng rng(seed, "fold-shuffle");
  rng.shuffle(graph_ids);
  FoldPlan plan;
  plan.k = k;
  const int64_t n = static_cast<int64_t>(graph_ids.size());
  const int64_t base = n / k;
  const int64_t extra = n % k;
  int64_t pos = 0;
  for (int64_t i = 0; i < k; ++i) {
    const int64_t size = base + (i < extra ? 1 : 0);
    plan.shards.emplace_back(graph_ids.begin() + pos, graph_ids.begin() + pos + size);
    pos += size;
  }
  return plan;
}

double lr_at(int64_t step, int64_t total_steps, const TrainConfig& cfg) {
  if (total_steps < 1) throw ValidationError("lr_at: total_steps must be positive");
  if (step < 0 || step > total_steps) throw ValidationError("lr_at: step out of range");
  const int64_t warmup = std::llround(cfg.warmup_frac * static_cast<double>(total_steps));
  if (warmup > 0 && step < warmup)
    return cfg.lr_peak * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps == warmup) return cfg.lr_peak;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return cfg.lr_floor +
         (cfg.lr_peak - cfg.lr_floor) * 0.5 * (1.0 + std::cos(progress * M_PI));
}

std::vector<int64_t> select_folds(const std::vector<double>& val_scores, int64_t keep) {
  if (static_cast<int64_t>(val_scores.size()) < keep)
    throw ValidationError("select_folds: fewer results than folds to keep");
  std::vector<int64_t> idx(val_scores.size());
  std::iota(idx.begin(), idx.end(), int64_t{0});
  std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    if (val_scores[static_cast<size_t>(a)] != val_scores[static_cast<size_t>(b)])
      return val_scores[static_cast<size_t>(a)] > val_scores[static_cast<size_t>(b)];
    return a < b;
  });
  idx.resize(static_cast<size_t>(keep));
  return idx;
}

double clip_global_norm(std::vector<Tensor*>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor* g : grads) {
    if (!g) continue;
    for (double v : g->data) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor* g : grads) {
      if (!g) continue;
      for (double& v : g->data) v *= scale;
    }
  }
  return norm;
}

void adamw_step(std::vector<Param>& params, const std::vector<const Tensor*>& grads,
                AdamWState& state, double lr, const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      state.m[i] = Tensor(params[i].value.shape);
      state.v[i] = Tensor(params[i].value.shape);
    }
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); ++i) {
    Param& p = params[i];
    if (!p.learnable) continue;
    const Tensor* g = grads[i];
    double* m = state.m[i].ptr();
    double* v = state.v[i].ptr();
    double* w = p.value.ptr();
    const double decay = p.decay ? lr * cfg.weight_decay : 0.0;
    for (int64_t j = 0; j < p.value.numel(); ++j) {
      const double gj = g ? g->data[static_cast<size_t>(j)] : 0.0;
      m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * gj;
      v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * gj * gj;
      if (decay != 0.0) w[j] -= decay * w[j];
      w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.adam_eps);
    }
  }
}

namespace {

struct UsableGraph {
  const LoadedGraph* graph;
  bool trainable;  // >= 2 configs and nonempty after pruning
};

double validation_tau(const TGraphModel& model, const std::vector<const LoadedGraph*>& val_graphs,
                      int64_t batch) {
  if (val_graphs.empty()) return std::nan("");
  double sum = 0.0;
  int64_t counted = 0;
  for (const LoadedGraph* g : val_graphs) {
    const std::vector<double> scores = score_all_configs(model, *g, batch);
    std::vector<double> runtimes;
    runtimes.reserve(scores.size());
    for (int64_t rt : g->configs.runtimes_ns) runtimes.push_back(static_cast<double>(rt));
    sum += kendall_tau(runtimes, scores);
    ++counted;
  }
  return sum / static_cast<double>(counted);
}

}  // namespace

TrainResult train_fold(const Dataset& dataset, int64_t fold, const TrainConfig& cfg,
                       ModelConfig model_cfg, std::ostream* log) {
  cfg.validate();
  if (!dataset.manifest.preprocessed)
    throw ValidationError("train: dataset must be preprocessed first (tgraph preprocess)");
  if (fold < 0 || fold >= cfg.k_folds) throw ValidationError("train: fold index out of range");

  const CollectionKind kind = dataset.manifest.kind;
  model_cfg.v_op = dataset.manifest.v_op;
  model_cfg.mode = kind.is_tile() ? ModelConfig::Mode::tile : ModelConfig::Mode::layout;
  model_cfg.validate();
  const double epochs = cfg.resolved_epochs(kind);
  const int64_t batch_configs = cfg.resolved_batch(kind);
  if (batch_configs < 2)
    throw ValidationError("train: ranking needs at least 2 configurations per batch");

  std::vector<std::string> all_ids;
  std::unordered_map<std::string, const LoadedGraph*> by_id;
  for (const LoadedGraph& g : dataset.graphs) {
    all_ids.push_back(g.graph.graph_id);
    by_id[g.graph.graph_id] = &g;
  }
  const FoldPlan plan = make_folds(all_ids, cfg.k_folds, cfg.seed);

  auto usable = [&](const LoadedGraph& g) {
    if (g.graph.n_nodes() == 0) return false;  // pruned to empty: no layout signal
    return g.configs.n_configs() >= 2;
  };

  std::vector<const LoadedGraph*> train_graphs, val_graphs;
  for (const std::string& id : plan.train_ids(fold)) {
    const LoadedGraph* g = by_id.at(id);
    if (usable(*g)) {
      train_graphs.push_back(g);
    } else {
      TGRAPH_LOG_INFO("fold %d: skipping graph '%s' (no rankable configurations)",
                      static_cast<int>(fold), id.c_str());
    }
  }
  for (const std::string& id : plan.val_ids(fold)) {
    const LoadedGraph* g = by_id.at(id);
    if (usable(*g)) val_graphs.push_back(g);
  }
  if (train_graphs.empty()) throw ValidationError("train: no trainable graphs in fold");

  // The scaler sees exactly the graphs that feed training batches.
  TGraphModel model = TGraphModel::init(model_cfg, derive_seed(cfg.seed, "model-init",
                                                               static_cast<uint64_t>(fold)));
  {
    std::vector<const ComputationGraph*> gs;
    for (const LoadedGraph* g : train_graphs) gs.push_back(&g->graph);
    model.scaler = fit_scaler(gs);
  }
  if (kind.is_tile()) {
    std::vector<const ConfigurationSet*> sets;
    std::vector<std::string> ids;
    for (const LoadedGraph* g : train_graphs) {
      sets.push_back(&g->configs);
      ids.push_back(g->graph.graph_id);
    }
    model.config_scaler = fit_config_scaler(sets, ids);
  }

  const int64_t steps_per_epoch = static_cast<int64_t>(train_graphs.size());
  const int64_t total_steps =
      std::max<int64_t>(1, std::llround(epochs * static_cast<double>(steps_per_epoch)));

  Rng rng(cfg.seed, "train-batches", static_cast<uint64_t>(fold));
  AdamWState opt;
  TrainResult result;
  result.trained_graphs = steps_per_epoch;
  result.total_steps = total_steps;
  result.best_val_tau = -2.0;

  std::vector<size_t> epoch_order(train_graphs.size());
  std::iota(epoch_order.begin(), epoch_order.end(), size_t{0});

  int64_t step = 0;
  int64_t last_val_step = -1;

  auto run_validation = [&](int64_t epoch) {
    // Validation batches match the training batch size: cross-configuration
    // attention makes scores depend on batch composition.
    const double tau = validation_tau(model, val_graphs, batch_configs);
    result.val_history.push_back(tau);
    last_val_step = step;
    if (log) {
      json line{{"step", step}, {"epoch", epoch}, {"tau_val", tau}};
      *log << line.dump() << '\n';
    }
    if (!std::isnan(tau) && tau > result.best_val_tau) {
      result.best_val_tau = tau;
      result.best_epoch = epoch;
      result.model = model;  // snapshot
    }
  };

  for (int64_t epoch = 0; step < total_steps; ++epoch) {
    rng.shuffle(epoch_order);
    for (size_t oi = 0; oi < epoch_order.size() && step < total_steps; ++oi) {
      const LoadedGraph& g = *train_graphs[epoch_order[oi]];
      const int64_t n_cfg = g.configs.n_configs();

      std::vector<int64_t> picks;
      if (n_cfg >= batch_configs) {
        picks = rng.sample_without_replacement(n_cfg, batch_configs);
      } else {
        picks.reserve(static_cast<size_t>(batch_configs));
        for (int64_t i = 0; i < batch_configs; ++i)
          picks.push_back(static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(n_cfg))));
      }

      const double lr = lr_at(step, total_steps, cfg);
      Tape tape;
      BoundParams bound = bind_params(tape, model, /*with_grads=*/true);
      BatchInput batch = make_batch_input(g, model.scaler, &model.config_scaler, picks);
      Var scores = model_forward(tape, bound, batch);
      int64_t active_pairs = 0;
      Var loss = pairwise_hinge_loss(scores, batch.runtimes, /*normalize=*/true, &active_pairs);
      tape.backward(loss);

      std::vector<Tensor*> grads(model.params.size(), nullptr);
      for (size_t i = 0; i < model.params.size(); ++i) {
        if (model.params[i].learnable && !bound.vars[i]->grad.data.empty())
          grads[i] = &bound.vars[i]->grad;
      }
      clip_global_norm(grads, cfg.grad_clip_norm);
      std::vector<const Tensor*> cgrads(grads.begin(), grads.end());
      adamw_step(model.params, cgrads, opt, lr, cfg);

      if (log) {
        json line{{"step", step},
                  {"epoch", epoch},
                  {"lr", lr},
                  {"loss", loss->value.data[0]},
                  {"active_pairs", active_pairs}};
        *log << line.dump() << '\n';
      }
      ++step;
    }
    if ((epoch + 1) % cfg.val_every_epochs == 0 || step >= total_steps) run_validation(epoch);
  }
  if (last_val_step != step) run_validation(static_cast<int64_t>(epochs));

  if (result.best_epoch < 0) {
    // No usable validation graphs; fall back to the final parameters.
    result.model = model;
    result.best_val_tau = std::nan("");
  }
  return result;
}

}  // namespace tgraph
