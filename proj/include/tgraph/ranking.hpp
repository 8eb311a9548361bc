// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Ranking loss and evaluation metrics.

#pragma once

#include <cstdint>
#include <vector>

#include "tgraph/autodiff.hpp"

namespace tgraph {

// L = sum_{i,j} I[r_i > r_j] * max(0, 1 - (s_i - s_j)), optionally divided
// by the number of active ordered pairs (pairs with r_i > r_j) so the
// learning rate is decoupled from batch size. The divisor used is reported
// through active_pairs_out and the training log.
Var pairwise_hinge_loss(const Var& scores, const std::vector<double>& runtimes, bool normalize,
                        int64_t* active_pairs_out = nullptr);

// Kendall rank correlation (tau-a: ties contribute 0). O(n log n)
// merge-sort implementation; exactly matches the O(n^2) sign-pair sum.
double kendall_tau(const std::vector<double>& runtimes, const std::vector<double>& scores);

// Direct evaluation of the defining sum; the test oracle.
double kendall_tau_bruteforce(const std::vector<double>& runtimes,
                              const std::vector<double>& scores);

// 2 - (best runtime among the k lowest-scored configs) / (best runtime
// overall); 1.0 iff a globally best config is in the top-k.
double tile_metric(const std::vector<double>& runtimes, const std::vector<double>& scores,
                   int64_t k = 5);

// Indices of the k lowest scores, ties broken by original index.
std::vector<int64_t> lowest_k(const std::vector<double>& scores, int64_t k);

}  // namespace tgraph
