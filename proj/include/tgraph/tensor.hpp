// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tgraph/common.hpp"

namespace tgraph {

// Dense row-major double tensor. Shapes are explicit; no strides, no views.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(numel_of(shape)), 0.0);
  }
  Tensor(std::vector<int64_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<int64_t>(data.size()) != numel_of(shape))
      throw ValidationError("tensor: data length does not match shape");
  }

  static int64_t numel_of(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
      if (d < 0) throw ValidationError("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor scalar(double v) { return Tensor({std::vector<int64_t>{}}, {v}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  size_t ndim() const { return shape.size(); }

  // Dimension lookup with negative indexing (-1 = last).
  int64_t dim(int i) const {
    const int n = static_cast<int>(shape.size());
    if (i < 0) i += n;
    if (i < 0 || i >= n) throw ValidationError("tensor: dimension index out of range");
    return shape[static_cast<size_t>(i)];
  }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape[i]);
    }
    return s + ")";
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace tgraph
