// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Arithmetic inner loops behind the autodiff engine. Every kernel exists as
// a scalar reference and, on x86-64, an AVX2+FMA variant picked at runtime.
//
// Lane equivalence contract: both lanes produce bitwise-identical results.
// Per-element ops round once per element in both lanes, and the matmul
// reductions use fused multiply-add in a fixed index order (std::fma in the
// scalar lane, vfmadd in the AVX2 lane), so vectorization only ever spans
// independent output elements. Tests assert exact equality.

#pragma once

#include <cstdint>

namespace tgraph::kernels {

enum class Lane { scalar, avx2 };

struct KernelTable {
  const char* name;

  // c (m x n) = a (m x k) * b (k x n); accumulates into c when acc is set.
  // Reduction over k runs in index order independently per output element,
  // so each output row is a pure function of the matching input row.
  void (*matmul_nn)(const double* a, const double* b, double* c, int64_t m, int64_t k,
                    int64_t n, bool acc);
  // c (k x n) = a^T * b with a (m x k), b (m x n); reduction over m in order.
  void (*matmul_tn)(const double* a, const double* b, double* c, int64_t m, int64_t k,
                    int64_t n, bool acc);

  void (*add)(const double* a, const double* b, double* out, int64_t n);
  void (*mul)(const double* a, const double* b, double* out, int64_t n);
  void (*add_inplace)(double* acc, const double* x, int64_t n);
  void (*mul_add)(const double* a, const double* b, double* acc, int64_t n);
  void (*scale)(const double* x, double alpha, double* out, int64_t n);
  void (*axpy)(double alpha, const double* x, double* y, int64_t n);
  void (*add_bias_rows)(const double* x, const double* bias, double* out, int64_t rows,
                        int64_t cols);
  // acc[c] += sum over rows of x[r, c], accumulated in row order.
  void (*accumulate_rows)(const double* x, double* acc, int64_t rows, int64_t cols);
  void (*relu)(const double* x, double* out, int64_t n);
  bool (*has_nan)(const double* x, int64_t n);
};

bool cpu_supports_avx2();
bool lane_available(Lane lane);
const char* lane_name(Lane lane);

// Throws ValidationError when the lane is not available on this machine.
const KernelTable& table(Lane lane);

// Active lane: TGRAPH_KERNELS=scalar|avx2 wins, otherwise best available.
const KernelTable& active();
Lane active_lane();
void set_lane(Lane lane);

// dst (cols x rows) = src^T with src (rows x cols). Shared by both lanes.
void transpose(const double* src, double* dst, int64_t rows, int64_t cols);

// Permutation-invariant sum of values in [0, 1]: each summand is quantized
// to fixed point and accumulated in integer arithmetic, so the result does
// not depend on summation order. Used by the configuration-axis softmax.
double invariant_unit_sum(const double* x, int64_t n, int64_t stride);

}  // namespace tgraph::kernels
