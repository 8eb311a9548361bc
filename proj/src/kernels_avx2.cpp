// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA lane. This translation unit is the only one compiled with
// -mavx2 -mfma; execution is gated behind the runtime CPU check in the
// dispatcher. Vector lanes always map to independent output elements so
// results match the scalar lane bit for bit.

#include <algorithm>
#include <cmath>

#include "tgraph/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace tgraph::kernels {
namespace {

// One C row: c[j..] accumulated over k with a fixed-order FMA chain per j.
inline void nn_row_tail(const double* arow, const double* b, double* crow, int64_t k,
                        int64_t n, int64_t j0) {
  for (int64_t j = j0; j < n; ++j) {
    double s = crow[j];
    for (int64_t p = 0; p < k; ++p) s = std::fma(arow[p], b[p * n + j], s);
    crow[j] = s;
  }
}

void matmul_nn_avx2(const double* a, const double* b, double* c, int64_t m, int64_t k,
                    int64_t n, bool acc) {
  const int64_t jend = n & ~int64_t{15};
  int64_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    if (!acc) {
      std::fill(c0, c0 + n, 0.0);
      std::fill(c1, c1 + n, 0.0);
    }
    for (int64_t j = 0; j < jend; j += 16) {
      __m256d r00 = _mm256_loadu_pd(c0 + j);
      __m256d r01 = _mm256_loadu_pd(c0 + j + 4);
      __m256d r02 = _mm256_loadu_pd(c0 + j + 8);
      __m256d r03 = _mm256_loadu_pd(c0 + j + 12);
      __m256d r10 = _mm256_loadu_pd(c1 + j);
      __m256d r11 = _mm256_loadu_pd(c1 + j + 4);
      __m256d r12 = _mm256_loadu_pd(c1 + j + 8);
      __m256d r13 = _mm256_loadu_pd(c1 + j + 12);
      for (int64_t p = 0; p < k; ++p) {
        const double* brow = b + p * n + j;
        const __m256d av0 = _mm256_broadcast_sd(a0 + p);
        const __m256d av1 = _mm256_broadcast_sd(a1 + p);
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        const __m256d b2 = _mm256_loadu_pd(brow + 8);
        const __m256d b3 = _mm256_loadu_pd(brow + 12);
        r00 = _mm256_fmadd_pd(av0, b0, r00);
        r01 = _mm256_fmadd_pd(av0, b1, r01);
        r02 = _mm256_fmadd_pd(av0, b2, r02);
        r03 = _mm256_fmadd_pd(av0, b3, r03);
        r10 = _mm256_fmadd_pd(av1, b0, r10);
        r11 = _mm256_fmadd_pd(av1, b1, r11);
        r12 = _mm256_fmadd_pd(av1, b2, r12);
        r13 = _mm256_fmadd_pd(av1, b3, r13);
      }
      _mm256_storeu_pd(c0 + j, r00);
      _mm256_storeu_pd(c0 + j + 4, r01);
      _mm256_storeu_pd(c0 + j + 8, r02);
      _mm256_storeu_pd(c0 + j + 12, r03);
      _mm256_storeu_pd(c1 + j, r10);
      _mm256_storeu_pd(c1 + j + 4, r11);
      _mm256_storeu_pd(c1 + j + 8, r12);
      _mm256_storeu_pd(c1 + j + 12, r13);
    }
    nn_row_tail(a0, b, c0, k, n, jend);
    nn_row_tail(a1, b, c1, k, n, jend);
  }
  for (; i < m; ++i) {
    const double* a0 = a + i * k;
    double* c0 = c + i * n;
    if (!acc) std::fill(c0, c0 + n, 0.0);
    for (int64_t j = 0; j < jend; j += 16) {
      __m256d r0 = _mm256_loadu_pd(c0 + j);
      __m256d r1 = _mm256_loadu_pd(c0 + j + 4);
      __m256d r2 = _mm256_loadu_pd(c0 + j + 8);
      __m256d r3 = _mm256_loadu_pd(c0 + j + 12);
      for (int64_t p = 0; p < k; ++p) {
        const double* brow = b + p * n + j;
        const __m256d av = _mm256_broadcast_sd(a0 + p);
        r0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), r0);
        r1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), r1);
        r2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 8), r2);
        r3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 12), r3);
      }
      _mm256_storeu_pd(c0 + j, r0);
      _mm256_storeu_pd(c0 + j + 4, r1);
      _mm256_storeu_pd(c0 + j + 8, r2);
      _mm256_storeu_pd(c0 + j + 12, r3);
    }
    nn_row_tail(a0, b, c0, k, n, jend);
  }
}

void matmul_tn_avx2(const double* a, const double* b, double* c, int64_t m, int64_t k,
                    int64_t n, bool acc) {
  const int64_t jend = n & ~int64_t{15};
  for (int64_t i = 0; i < k; ++i) {
    double* crow = c + i * n;
    if (!acc) std::fill(crow, crow + n, 0.0);
    for (int64_t j = 0; j < jend; j += 16) {
      __m256d r0 = _mm256_loadu_pd(crow + j);
      __m256d r1 = _mm256_loadu_pd(crow + j + 4);
      __m256d r2 = _mm256_loadu_pd(crow + j + 8);
      __m256d r3 = _mm256_loadu_pd(crow + j + 12);
      for (int64_t p = 0; p < m; ++p) {
        const double* brow = b + p * n + j;
        const __m256d av = _mm256_broadcast_sd(a + p * k + i);
        r0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow), r0);
        r1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 4), r1);
        r2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 8), r2);
        r3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + 12), r3);
      }
      _mm256_storeu_pd(crow + j, r0);
      _mm256_storeu_pd(crow + j + 4, r1);
      _mm256_storeu_pd(crow + j + 8, r2);
      _mm256_storeu_pd(crow + j + 12, r3);
    }
    for (int64_t j = jend; j < n; ++j) {
      double s = crow[j];
      for (int64_t p = 0; p < m; ++p) s = std::fma(a[p * k + i], b[p * n + j], s);
      crow[j] = s;
    }
  }
}

void add_avx2(const double* a, const double* b, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_avx2(const double* a, const double* b, double* out, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void add_inplace_avx2(double* acc, const double* x, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) acc[i] += x[i];
}

void mul_add_avx2(const double* a, const double* b, double* acc, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(acc + i, _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                                              _mm256_loadu_pd(acc + i)));
  for (; i < n; ++i) acc[i] = std::fma(a[i], b[i], acc[i]);
}

void scale_avx2(const double* x, double alpha, double* out, int64_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  for (; i < n; ++i) out[i] = x[i] * alpha;
}

void axpy_avx2(double alpha, const double* x, double* y, int64_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void add_bias_rows_avx2(const double* x, const double* bias, double* out, int64_t rows,
                        int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) add_avx2(x + r * cols, bias, out + r * cols, cols);
}

void accumulate_rows_avx2(const double* x, double* acc, int64_t rows, int64_t cols) {
  for (int64_t r = 0; r < rows; ++r) add_inplace_avx2(acc, x + r * cols, cols);
}

void relu_avx2(const double* x, double* out, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

bool has_nan_avx2(const double* x, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    if (_mm256_movemask_pd(_mm256_cmp_pd(v, v, _CMP_UNORD_Q)) != 0) return true;
  }
  for (; i < n; ++i) {
    if (x[i] != x[i]) return true;
  }
  return false;
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{
      "avx2",        matmul_nn_avx2,      matmul_tn_avx2, add_avx2,
      mul_avx2,      add_inplace_avx2,    mul_add_avx2,   scale_avx2,
      axpy_avx2,     add_bias_rows_avx2,  accumulate_rows_avx2,
      relu_avx2,     has_nan_avx2,
  };
  return &t;
}

}  // namespace tgraph::kernels

#else

namespace tgraph::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace tgraph::kernels

#endif
