// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/kernels.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "tgraph/common.hpp"

namespace tgraph::kernels {

const KernelTable* scalar_table();
const KernelTable* avx2_table();

bool cpu_supports_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool lane_available(Lane lane) {
  if (lane == Lane::scalar) return true;
  return avx2_table() != nullptr && cpu_supports_avx2();
}

const char* lane_name(Lane lane) { return lane == Lane::scalar ? "scalar" : "avx2"; }

const KernelTable& table(Lane lane) {
  if (lane == Lane::scalar) return *scalar_table();
  if (!lane_available(Lane::avx2))
    throw ValidationError("kernel lane 'avx2' is not available on this machine");
  return *avx2_table();
}

namespace {

Lane pick_initial_lane() {
  if (const char* env = std::getenv("TGRAPH_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Lane::scalar;
    if (v == "avx2") {
      if (!lane_available(Lane::avx2))
        throw ValidationError("TGRAPH_KERNELS=avx2 but AVX2 is not available");
      return Lane::avx2;
    }
    if (!v.empty() && v != "auto")
      throw ValidationError("unknown TGRAPH_KERNELS value: " + v);
  }
  return lane_available(Lane::avx2) ? Lane::avx2 : Lane::scalar;
}

Lane& lane_ref() {
  static Lane lane = pick_initial_lane();
  return lane;
}

}  // namespace

Lane active_lane() { return lane_ref(); }

void set_lane(Lane lane) {
  if (!lane_available(lane))
    throw ValidationError(std::string("kernel lane '") + lane_name(lane) +
                          "' is not available on this machine");
  lane_ref() = lane;
}

const KernelTable& active() { return table(lane_ref()); }

void transpose(const double* src, double* dst, int64_t rows, int64_t cols) {
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

double invariant_unit_sum(const double* x, int64_t n, int64_t stride) {
  // Quantization step 2^-bits; shrink bits so n summands cannot overflow
  // the 63-bit accumulator. Quantization error <= n * 2^-bits, negligible
  // against the exp() rounding already present in softmax inputs.
  int bits = 53;
  const int width = std::bit_width(static_cast<uint64_t>(n) + 1);
  if (62 - width < bits) bits = 62 - width;
  const double up = std::ldexp(1.0, bits);
  const double down = std::ldexp(1.0, -bits);
  long long acc = 0;
  for (int64_t i = 0; i < n; ++i) acc += std::llrint(x[i * stride] * up);
  return static_cast<double>(acc) * down;
}

}  // namespace tgraph::kernels
