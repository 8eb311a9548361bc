// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/inference.hpp"

#include <numeric>

#include "tgraph/ranking.hpp"
#include "tgraph/rng.hpp"

namespace tgraph {

namespace {

// Scores the configurations listed in `order`, writing each score back to
// its original position.
void score_permuted(const TGraphModel& model, const LoadedGraph& g,
                    const std::vector<int64_t>& order, int64_t batch,
                    std::vector<double>& out) {
  const int64_t n = static_cast<int64_t>(order.size());
  for (int64_t start = 0; start < n; start += batch) {
    const int64_t end = std::min(n, start + batch);
    const std::vector<int64_t> chunk(order.begin() + start, order.begin() + end);
    Tape tape;
    BoundParams bound = bind_params(tape, model, /*with_grads=*/false);
    BatchInput input = make_batch_input(g, model.scaler, &model.config_scaler, chunk);
    Var scores = model_forward(tape, bound, input);
    for (int64_t i = 0; i < end - start; ++i)
      out[static_cast<size_t>(chunk[static_cast<size_t>(i)])] =
          scores->value.data[static_cast<size_t>(i)];
  }
}

}  // namespace

RankingResult rank(const LoadedGraph& g, const std::vector<const TGraphModel*>& models,
                   int64_t n_tta, int64_t batch, uint64_t tta_seed) {
  if (models.empty()) throw ValidationError("rank: need at least one checkpoint");
  if (n_tta < 1) throw ValidationError("rank: need at least one TTA round");
  if (batch < 1) throw ValidationError("rank: batch must be positive");
  const int64_t n = g.configs.n_configs();

  // Permutations are shared across folds; round 0 is the identity so a
  // single round reduces to the plain forward pass.
  std::vector<std::vector<int64_t>> perms(static_cast<size_t>(n_tta));
  for (int64_t t = 0; t < n_tta; ++t) {
    auto& p = perms[static_cast<size_t>(t)];
    p.resize(static_cast<size_t>(n));
    std::iota(p.begin(), p.end(), int64_t{0});
    if (t > 0) {
      Rng rng(tta_seed, "tta-permutation", static_cast<uint64_t>(t));
      rng.shuffle(p);
    }
  }

  RankingResult result;
  result.scores.assign(static_cast<size_t>(n), 0.0);
  result.n_tta = n_tta;
  result.tta_seed = tta_seed;
  result.n_checkpoints = static_cast<int64_t>(models.size());

  std::vector<double> round_scores(static_cast<size_t>(n));
  int64_t rounds_done = 0;
  for (const TGraphModel* model : models) {    // fold-major
    for (int64_t t = 0; t < n_tta; ++t) {      // TTA-minor
      score_permuted(*model, g, perms[static_cast<size_t>(t)], batch, round_scores);
      ++rounds_done;
      // Running mean: exact when every round agrees, deterministic always.
      const double inv = 1.0 / static_cast<double>(rounds_done);
      for (int64_t i = 0; i < n; ++i) {
        double& acc = result.scores[static_cast<size_t>(i)];
        acc += (round_scores[static_cast<size_t>(i)] - acc) * inv;
      }
    }
  }
  result.order = lowest_k(result.scores, n);
  return result;
}

std::vector<int64_t> top_k(const RankingResult& result, int64_t k) {
  return lowest_k(result.scores, k);
}

std::vector<double> score_all_configs(const TGraphModel& model, const LoadedGraph& g,
                                      int64_t batch) {
  return rank(g, {&model}, /*n_tta=*/1, batch, /*tta_seed=*/0).scores;
}

}  // namespace tgraph
