// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/ranking.hpp"

#include <algorithm>
#include <numeric>

namespace tgraph {

Var pairwise_hinge_loss(const Var& scores, const std::vector<double>& runtimes, bool normalize,
                        int64_t* active_pairs_out) {
  const int64_t n = scores->value.numel();
  if (static_cast<int64_t>(runtimes.size()) != n)
    throw ValidationError("pairwise_hinge_loss: scores and runtimes length mismatch");
  if (n < 2) throw ValidationError("pairwise_hinge_loss: need at least 2 configurations");

  const double* s = scores->value.ptr();
  double loss = 0.0;
  int64_t active = 0;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      if (runtimes[static_cast<size_t>(i)] > runtimes[static_cast<size_t>(j)]) {
        ++active;
        const double margin = 1.0 - (s[i] - s[j]);
        if (margin > 0.0) loss += margin;
      }
    }
  }
  const double norm = normalize ? static_cast<double>(std::max<int64_t>(active, 1)) : 1.0;
  if (active_pairs_out) *active_pairs_out = active;

  return scores->tape->record(
      "pairwise_hinge_loss", Tensor::scalar(loss / norm), {scores},
      [runtimes, n, norm](Node& node) {
        const Var& s_ = node.inputs[0];
        if (!s_->requires_grad) return;
        const double g = node.grad.data[0] / norm;
        const double* sv = s_->value.ptr();
        double* sg = s_->ensure_grad().ptr();
        for (int64_t i = 0; i < n; ++i) {
          for (int64_t j = 0; j < n; ++j) {
            if (runtimes[static_cast<size_t>(i)] > runtimes[static_cast<size_t>(j)] &&
                1.0 - (sv[i] - sv[j]) > 0.0) {
              sg[i] -= g;
              sg[j] += g;
            }
          }
        }
      });
}

namespace {

int64_t check_pair_lengths(const std::vector<double>& r, const std::vector<double>& s,
                           const char* op) {
  if (r.size() != s.size())
    throw ValidationError(std::string(op) + ": runtimes and scores length mismatch");
  if (r.size() < 2) throw ValidationError(std::string(op) + ": need at least 2 entries");
  return static_cast<int64_t>(r.size());
}

// Strict inversions (left > right) counted by merge sort.
int64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp, size_t lo, size_t hi) {
  if (hi - lo < 2) return 0;
  const size_t mid = lo + (hi - lo) / 2;
  int64_t count = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
  size_t a = lo, b = mid, out = lo;
  while (a < mid && b < hi) {
    if (v[a] <= v[b]) {
      tmp[out++] = v[a++];
    } else {
      count += static_cast<int64_t>(mid - a);
      tmp[out++] = v[b++];
    }
  }
  while (a < mid) tmp[out++] = v[a++];
  while (b < hi) tmp[out++] = v[b++];
  std::copy(tmp.begin() + static_cast<long>(lo), tmp.begin() + static_cast<long>(hi),
            v.begin() + static_cast<long>(lo));
  return count;
}

int64_t tied_pairs(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  int64_t total = 0, run = 1;
  for (size_t i = 1; i <= v.size(); ++i) {
    if (i < v.size() && v[i] == v[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

}  // namespace

double kendall_tau(const std::vector<double>& r, const std::vector<double>& s) {
  const int64_t n = check_pair_lengths(r, s, "kendall_tau");
  std::vector<size_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (r[a] != r[b]) return r[a] < r[b];
    return s[a] < s[b];
  });

  std::vector<double> s_sorted(static_cast<size_t>(n));
  for (size_t i = 0; i < order.size(); ++i) s_sorted[i] = s[order[i]];

  // Sorting secondary by s leaves equal-r groups ascending in s, so strict
  // inversions count exactly the discordant pairs.
  int64_t ties_both = 0, run = 1;
  for (size_t i = 1; i <= order.size(); ++i) {
    if (i < order.size() && r[order[i]] == r[order[i - 1]] && s[order[i]] == s[order[i - 1]]) {
      ++run;
    } else {
      ties_both += run * (run - 1) / 2;
      run = 1;
    }
  }

  std::vector<double> tmp(static_cast<size_t>(n));
  const int64_t discordant = count_inversions(s_sorted, tmp, 0, static_cast<size_t>(n));
  const int64_t total = n * (n - 1) / 2;
  const int64_t numer =
      total - 2 * discordant - tied_pairs(r) - tied_pairs(s) + ties_both;
  return 2.0 * static_cast<double>(numer) / static_cast<double>(n * (n - 1));
}

double kendall_tau_bruteforce(const std::vector<double>& r, const std::vector<double>& s) {
  const int64_t n = check_pair_lengths(r, s, "kendall_tau");
  auto sgn = [](double x) { return (x > 0.0) - (x < 0.0); };
  int64_t numer = 0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = i + 1; j < n; ++j)
      numer += sgn(s[static_cast<size_t>(i)] - s[static_cast<size_t>(j)]) *
               sgn(r[static_cast<size_t>(i)] - r[static_cast<size_t>(j)]);
  return 2.0 * static_cast<double>(numer) / static_cast<double>(n * (n - 1));
}

std::vector<int64_t> lowest_k(const std::vector<double>& scores, int64_t k) {
  if (k < 1) throw ValidationError("lowest_k: k must be at least 1");
  std::vector<int64_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), int64_t{0});
  std::sort(idx.begin(), idx.end(), [&](int64_t a, int64_t b) {
    if (scores[static_cast<size_t>(a)] != scores[static_cast<size_t>(b)])
      return scores[static_cast<size_t>(a)] < scores[static_cast<size_t>(b)];
    return a < b;
  });
  if (static_cast<int64_t>(idx.size()) > k) idx.resize(static_cast<size_t>(k));
  return idx;
}

double tile_metric(const std::vector<double>& runtimes, const std::vector<double>& scores,
                   int64_t k) {
  if (runtimes.empty()) throw ValidationError("tile_metric: empty input");
  if (runtimes.size() != scores.size())
    throw ValidationError("tile_metric: runtimes and scores length mismatch");
  const auto top = lowest_k(scores, k);
  double best_top = runtimes[static_cast<size_t>(top[0])];
  for (int64_t i : top) best_top = std::min(best_top, runtimes[static_cast<size_t>(i)]);
  const double best_all = *std::min_element(runtimes.begin(), runtimes.end());
  return 2.0 - best_top / best_all;
}

}  // namespace tgraph
