// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over dense double tensors. A Tape is rebuilt for
// every forward pass; nodes are recorded in execution order, which is a
// topological order, and backward replays them in reverse. Every op checks
// its forward output for NaN and fails fast.
//
// A tape and its nodes are confined to one logical thread; Vars must not
// outlive the tape that recorded them.

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tgraph/tensor.hpp"

namespace tgraph {

class Tape;
struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation; empty means "not reached"
  bool requires_grad = false;
  const char* op = "leaf";
  Tape* tape = nullptr;
  std::vector<Var> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.data.empty() && value.numel() >= 0) grad = Tensor(value.shape);
    return grad;
  }
};

class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = false);
  Var record(const char* op, Tensor value, std::vector<Var> inputs,
             std::function<void(Node&)> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and accumulates grads into every
  // requires_grad node reachable from the loss. Loss must be scalar.
  void backward(const Var& loss);

  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Var> nodes_;
};

// ---- operator set ----------------------------------------------------
// Shapes follow row-major layout with the configuration/batch axis leading
// where one exists. "rows" always means the second-to-last axis.

// a (lead.., M, K) x w (K, N) -> (lead.., M, N)
Var matmul(const Var& a, const Var& w);
// b may equal a's shape or be a trailing-suffix shape (broadcast over rows).
Var add(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // same-shape elementwise
Var concat(const std::vector<Var>& parts, int axis);
// x (lead.., N, C), idx values in [0, N) -> (lead.., |idx|, C)
Var gather_rows(const Var& x, const std::vector<int64_t>& idx);
// x (lead.., E, C) summed into n_segments rows by ids (length E)
Var segment_sum(const Var& x, const std::vector<int64_t>& segment_ids, int64_t n_segments);
Var mean(const Var& x, int axis);
Var l2_normalize(const Var& x, int axis, double eps);
// x (B, N, C) normalized over the node axis per (batch, channel)
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps);
Var gelu(const Var& x);  // exact erf form
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
// softmax over `axis` of x / temperature; temperature is a positive scalar
// Var so a learnable temperature differentiates through the same op. The
// normalizer uses an order-invariant fixed-point sum, so the result is
// bitwise equivariant under permutations of the reduced axis.
Var softmax(const Var& x, int axis, const Var& temperature);
// table (V, E) indexed by `indices`; output shape = index_shape + [E]
Var embedding_lookup(const Var& table, const std::vector<int64_t>& indices,
                     const std::vector<int64_t>& index_shape);
Var reshape(const Var& x, std::vector<int64_t> shape);
// tile x along a new leading axis of size n; backward sums the copies
Var expand_leading(const Var& x, int64_t n);
Var sum_all(const Var& x);  // -> scalar

}  // namespace tgraph
