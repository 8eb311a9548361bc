// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Scoring and ranking configurations with test-time augmentation and fold
// ensembling.

#pragma once

#include <cstdint>
#include <vector>

#include "tgraph/dataset.hpp"
#include "tgraph/model.hpp"

namespace tgraph {

struct RankingResult {
  std::vector<double> scores;  // per original configuration index
  std::vector<int64_t> order;  // ascending score; order[0] is the predicted best
  int64_t n_tta = 0;
  uint64_t tta_seed = 0;
  int64_t n_checkpoints = 0;
};

// Scores every configuration of the graph with each checkpoint, averaging
// over n_tta batch permutations (round 0 is the identity) and then over
// checkpoints, in fold-major TTA-minor order. Batches hold at most `batch`
// configurations; each round's scores are sorted back to the original
// order before averaging.
RankingResult rank(const LoadedGraph& g, const std::vector<const TGraphModel*>& models,
                   int64_t n_tta = 10, int64_t batch = 128, uint64_t tta_seed = 0);

// Indices of the k lowest ensembled scores, ties broken by index.
std::vector<int64_t> top_k(const RankingResult& result, int64_t k);

// Single-model single-pass scores in the original configuration order.
std::vector<double> score_all_configs(const TGraphModel& model, const LoadedGraph& g,
                                      int64_t batch = 128);

}  // namespace tgraph
