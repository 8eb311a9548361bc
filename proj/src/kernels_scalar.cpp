// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Portable reference lane. std::fma keeps the reductions bitwise-compatible
// with the FMA instructions the AVX2 lane uses.

#include <algorithm>
#include <cmath>

#include "tgraph/kernels.hpp"

namespace tgraph::kernels {
namespace {

void matmul_nn_scalar(const double* a, const double* b, double* c, int64_t m, int64_t k,
                      int64_t n, bool acc) {
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    if (!acc) std::fill(crow, crow + n, 0.0);
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

void matmul_tn_scalar(const double* a, const double* b, double* c, int64_t m, int64_t k,
                      int64_t n, bool acc) {
  for (int64_t i = 0; i < k; ++i) {
    double* crow = c + i * n;
    if (!acc) std::fill(crow, crow + n, 0.0);
    for (int64_t p = 0; p < m; ++p) {
      const double av = a[p * k + i];
      const double* brow = b + p * n;
      for (int64_t j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

void add_scalar(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_scalar(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void add_inplace_scalar(double* acc, const double* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) acc[i] += x[i];
}

void mul_add_scalar(const double* a, const double* b, double* acc, int64_t n) {
  for (int64_t i = 0; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}

void scale_scalar(const double* x, double alpha, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] * alpha;
}

void axpy_scalar(double alpha, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_bias_rows_scalar(const double* x, const double* bias, double* out, int64_t rows,
                          int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    double* or_ = out + r * cols;
    for (int64_t c = 0; c < cols; ++c) or_[c] = xr[c] + bias[c];
  }
}

void accumulate_rows_scalar(const double* x, double* acc, int64_t rows, int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = x + r * cols;
    for (int64_t c = 0; c < cols; ++c) acc[c] += xr[c];
  }
}

void relu_scalar(const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

bool has_nan_scalar(const double* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    if (x[i] != x[i]) return true;
  }
  return false;
}

}  // namespace

const KernelTable* scalar_table() {
  static const KernelTable t{
      "scalar",          matmul_nn_scalar,      matmul_tn_scalar, add_scalar,
      mul_scalar,        add_inplace_scalar,    mul_add_scalar,   scale_scalar,
      axpy_scalar,       add_bias_rows_scalar,  accumulate_rows_scalar,
      relu_scalar,       has_nan_scalar,
  };
  return &t;
}

}  // namespace tgraph::kernels
