// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "tgraph/kernels.hpp"

namespace tgraph {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_nan(const char* op, const Tensor& t) {
  if (kernels::active().has_nan(t.ptr(), t.numel()))
    throw NumericError(std::string(op) + ": NaN in forward output " + t.shape_str());
}

int normalize_axis(int axis, size_t ndim, const char* op) {
  int ax = axis;
  if (ax < 0) ax += static_cast<int>(ndim);
  if (ax < 0 || ax >= static_cast<int>(ndim))
    throw ValidationError(std::string(op) + ": axis out of range");
  return ax;
}

struct AxisSplit {
  int64_t outer = 1, d = 1, inner = 1;
};

AxisSplit split_at(const std::vector<int64_t>& shape, int ax) {
  AxisSplit s;
  for (int i = 0; i < ax; ++i) s.outer *= shape[static_cast<size_t>(i)];
  s.d = shape[static_cast<size_t>(ax)];
  for (size_t i = static_cast<size_t>(ax) + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ValidationError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                        b.shape_str());
}

bool is_suffix_shape(const Tensor& a, const Tensor& b) {
  if (b.ndim() > a.ndim()) return false;
  const size_t off = a.ndim() - b.ndim();
  for (size_t i = 0; i < b.ndim(); ++i) {
    if (a.shape[off + i] != b.shape[i]) return false;
  }
  return true;
}

}  // namespace

Var Tape::leaf(Tensor value, bool requires_grad) {
  check_nan("leaf", value);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->tape = this;
  nodes_.push_back(n);
  return n;
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs,
                 std::function<void(Node&)> backward_fn) {
  check_nan(op, value);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  n->tape = this;
  for (const auto& in : inputs) {
    if (in->tape != this) throw ValidationError(std::string(op) + ": input from another tape");
    n->requires_grad = n->requires_grad || in->requires_grad;
  }
  n->inputs = std::move(inputs);
  if (n->requires_grad) n->backward_fn = std::move(backward_fn);
  nodes_.push_back(n);
  return n;
}

void Tape::backward(const Var& loss) {
  if (loss->value.numel() != 1)
    throw ValidationError("backward: loss must be scalar, got " + loss->value.shape_str());
  if (loss->tape != this) throw ValidationError("backward: loss from another tape");
  loss->ensure_grad().data[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (!n.requires_grad || !n.backward_fn) continue;
    if (n.grad.data.empty()) continue;  // not on a path to the loss
    n.backward_fn(n);
  }
}

Var matmul(const Var& a, const Var& w) {
  const Tensor& av = a->value;
  const Tensor& wv = w->value;
  if (av.ndim() < 1 || wv.ndim() != 2 || av.dim(-1) != wv.dim(0)) shape_error("matmul", av, wv);
  const int64_t k = wv.dim(0);
  const int64_t n = wv.dim(1);
  const int64_t rows = av.numel() / k;
  std::vector<int64_t> out_shape = av.shape;
  out_shape.back() = n;
  Tensor out(std::move(out_shape));
  kernels::active().matmul_nn(av.ptr(), wv.ptr(), out.ptr(), rows, k, n, false);
  return a->tape->record("matmul", std::move(out), {a, w}, [rows, k, n](Node& node) {
    const auto& kt = kernels::active();
    const Var& a_ = node.inputs[0];
    const Var& w_ = node.inputs[1];
    const double* g = node.grad.ptr();
    if (a_->requires_grad) {
      std::vector<double> wt(static_cast<size_t>(k * n));
      kernels::transpose(w_->value.ptr(), wt.data(), k, n);
      kt.matmul_nn(g, wt.data(), a_->ensure_grad().ptr(), rows, n, k, true);
    }
    if (w_->requires_grad) {
      kt.matmul_tn(a_->value.ptr(), g, w_->ensure_grad().ptr(), rows, k, n, true);
    }
  });
}

Var add(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  Tensor out(av.shape);
  const auto& kt = kernels::active();
  if (same_shape(av, bv)) {
    kt.add(av.ptr(), bv.ptr(), out.ptr(), av.numel());
  } else if (is_suffix_shape(av, bv) && bv.numel() > 0) {
    kt.add_bias_rows(av.ptr(), bv.ptr(), out.ptr(), av.numel() / bv.numel(), bv.numel());
  } else {
    shape_error("add", av, bv);
  }
  return a->tape->record("add", std::move(out), {a, b}, [](Node& node) {
    const auto& k = kernels::active();
    const Var& a_ = node.inputs[0];
    const Var& b_ = node.inputs[1];
    const double* g = node.grad.ptr();
    if (a_->requires_grad) k.add_inplace(a_->ensure_grad().ptr(), g, node.grad.numel());
    if (b_->requires_grad) {
      const int64_t cols = b_->value.numel();
      k.accumulate_rows(g, b_->ensure_grad().ptr(), node.grad.numel() / cols, cols);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (!same_shape(av, bv)) shape_error("mul", av, bv);
  Tensor out(av.shape);
  kernels::active().mul(av.ptr(), bv.ptr(), out.ptr(), av.numel());
  return a->tape->record("mul", std::move(out), {a, b}, [](Node& node) {
    const auto& k = kernels::active();
    const Var& a_ = node.inputs[0];
    const Var& b_ = node.inputs[1];
    const double* g = node.grad.ptr();
    const int64_t n = node.grad.numel();
    if (a_->requires_grad) k.mul_add(g, b_->value.ptr(), a_->ensure_grad().ptr(), n);
    if (b_->requires_grad) k.mul_add(g, a_->value.ptr(), b_->ensure_grad().ptr(), n);
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ValidationError("concat: no inputs");
  const int ax = normalize_axis(axis, parts[0]->value.ndim(), "concat");
  std::vector<int64_t> out_shape = parts[0]->value.shape;
  int64_t total_d = 0;
  for (const auto& p : parts) {
    if (p->value.ndim() != parts[0]->value.ndim()) shape_error("concat", parts[0]->value, p->value);
    for (size_t i = 0; i < out_shape.size(); ++i) {
      if (static_cast<int>(i) != ax && p->value.shape[i] != out_shape[i])
        shape_error("concat", parts[0]->value, p->value);
    }
    total_d += p->value.shape[static_cast<size_t>(ax)];
  }
  out_shape[static_cast<size_t>(ax)] = total_d;
  const AxisSplit s = split_at(out_shape, ax);
  Tensor out(out_shape);
  for (int64_t o = 0; o < s.outer; ++o) {
    double* dst = out.ptr() + o * s.d * s.inner;
    for (const auto& p : parts) {
      const int64_t block = p->value.shape[static_cast<size_t>(ax)] * s.inner;
      std::memcpy(dst, p->value.ptr() + o * block, static_cast<size_t>(block) * sizeof(double));
      dst += block;
    }
  }
  return parts[0]->tape->record("concat", std::move(out), parts, [s](Node& node) {
    const auto& k = kernels::active();
    for (int64_t o = 0; o < s.outer; ++o) {
      const double* src = node.grad.ptr() + o * s.d * s.inner;
      int64_t off = 0;
      for (const auto& p : node.inputs) {
        const int64_t blk = p->value.numel() / s.outer;
        if (p->requires_grad) k.add_inplace(p->ensure_grad().ptr() + o * blk, src + off, blk);
        off += blk;
      }
    }
  });
}

Var gather_rows(const Var& x, const std::vector<int64_t>& idx) {
  const Tensor& xv = x->value;
  if (xv.ndim() < 2) throw ValidationError("gather_rows: need at least 2 dims");
  const int64_t n_rows = xv.dim(-2);
  const int64_t cols = xv.dim(-1);
  const int64_t lead = xv.numel() / (n_rows * cols);
  for (int64_t i : idx) {
    if (i < 0 || i >= n_rows) throw ValidationError("gather_rows: index out of range");
  }
  std::vector<int64_t> out_shape = xv.shape;
  out_shape[out_shape.size() - 2] = static_cast<int64_t>(idx.size());
  Tensor out(out_shape);
  const int64_t e = static_cast<int64_t>(idx.size());
  for (int64_t l = 0; l < lead; ++l) {
    const double* src = xv.ptr() + l * n_rows * cols;
    double* dst = out.ptr() + l * e * cols;
    for (int64_t r = 0; r < e; ++r)
      std::memcpy(dst + r * cols, src + idx[static_cast<size_t>(r)] * cols,
                  static_cast<size_t>(cols) * sizeof(double));
  }
  return x->tape->record("gather_rows", std::move(out), {x},
                         [idx, lead, n_rows, cols, e](Node& node) {
                           const Var& x_ = node.inputs[0];
                           if (!x_->requires_grad) return;
                           const auto& k = kernels::active();
                           double* xg = x_->ensure_grad().ptr();
                           const double* g = node.grad.ptr();
                           for (int64_t l = 0; l < lead; ++l) {
                             for (int64_t r = 0; r < e; ++r)
                               k.add_inplace(xg + (l * n_rows + idx[static_cast<size_t>(r)]) * cols,
                                             g + (l * e + r) * cols, cols);
                           }
                         });
}

Var segment_sum(const Var& x, const std::vector<int64_t>& segment_ids, int64_t n_segments) {
  const Tensor& xv = x->value;
  if (xv.ndim() < 2) throw ValidationError("segment_sum: need at least 2 dims");
  const int64_t e = xv.dim(-2);
  const int64_t cols = xv.dim(-1);
  const int64_t lead = xv.numel() / (e * cols);
  if (static_cast<int64_t>(segment_ids.size()) != e)
    throw ValidationError("segment_sum: ids length does not match rows");
  for (int64_t id : segment_ids) {
    if (id < 0 || id >= n_segments)
      throw ValidationError("segment_sum: segment id out of range");
  }
  std::vector<int64_t> out_shape = xv.shape;
  out_shape[out_shape.size() - 2] = n_segments;
  Tensor out(out_shape);
  const auto& kt = kernels::active();
  for (int64_t l = 0; l < lead; ++l) {
    const double* src = xv.ptr() + l * e * cols;
    double* dst = out.ptr() + l * n_segments * cols;
    for (int64_t r = 0; r < e; ++r)
      kt.add_inplace(dst + segment_ids[static_cast<size_t>(r)] * cols, src + r * cols, cols);
  }
  return x->tape->record("segment_sum", std::move(out), {x},
                         [segment_ids, lead, e, cols, n_segments](Node& node) {
                           const Var& x_ = node.inputs[0];
                           if (!x_->requires_grad) return;
                           const auto& k = kernels::active();
                           double* xg = x_->ensure_grad().ptr();
                           const double* g = node.grad.ptr();
                           for (int64_t l = 0; l < lead; ++l) {
                             for (int64_t r = 0; r < e; ++r)
                               k.add_inplace(xg + (l * e + r) * cols,
                                             g + (l * n_segments +
                                                  segment_ids[static_cast<size_t>(r)]) * cols,
                                             cols);
                           }
                         });
}

Var mean(const Var& x, int axis) {
  const Tensor& xv = x->value;
  const int ax = normalize_axis(axis, xv.ndim(), "mean");
  const AxisSplit s = split_at(xv.shape, ax);
  if (s.d == 0) throw ValidationError("mean: empty axis");
  std::vector<int64_t> out_shape;
  for (size_t i = 0; i < xv.shape.size(); ++i) {
    if (static_cast<int>(i) != ax) out_shape.push_back(xv.shape[i]);
  }
  Tensor out(out_shape);
  const auto& kt = kernels::active();
  for (int64_t o = 0; o < s.outer; ++o)
    kt.accumulate_rows(xv.ptr() + o * s.d * s.inner, out.ptr() + o * s.inner, s.d, s.inner);
  kt.scale(out.ptr(), 1.0 / static_cast<double>(s.d), out.ptr(), out.numel());
  return x->tape->record("mean", std::move(out), {x}, [s](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    const auto& k = kernels::active();
    const double inv = 1.0 / static_cast<double>(s.d);
    double* xg = x_->ensure_grad().ptr();
    const double* g = node.grad.ptr();
    for (int64_t o = 0; o < s.outer; ++o)
      for (int64_t d = 0; d < s.d; ++d)
        k.axpy(inv, g + o * s.inner, xg + (o * s.d + d) * s.inner, s.inner);
  });
}

Var l2_normalize(const Var& x, int axis, double eps) {
  const Tensor& xv = x->value;
  if (normalize_axis(axis, xv.ndim(), "l2_normalize") != static_cast<int>(xv.ndim()) - 1)
    throw ValidationError("l2_normalize: only the last axis is supported");
  const int64_t cols = xv.dim(-1);
  const int64_t rows = xv.numel() / cols;
  Tensor out(xv.shape);
  std::vector<double> inv_norm(static_cast<size_t>(rows));
  const auto& kt = kernels::active();
  for (int64_t r = 0; r < rows; ++r) {
    const double* xr = xv.ptr() + r * cols;
    double q = 0.0;
    for (int64_t c = 0; c < cols; ++c) q += xr[c] * xr[c];
    const double inv = 1.0 / std::sqrt(q + eps);
    inv_norm[static_cast<size_t>(r)] = inv;
    kt.scale(xr, inv, out.ptr() + r * cols, cols);
  }
  return x->tape->record("l2_normalize", std::move(out), {x},
                         [rows, cols, inv_norm](Node& node) {
                           const Var& x_ = node.inputs[0];
                           if (!x_->requires_grad) return;
                           double* xg = x_->ensure_grad().ptr();
                           const double* g = node.grad.ptr();
                           const double* xd = x_->value.ptr();
                           for (int64_t r = 0; r < rows; ++r) {
                             const double inv = inv_norm[static_cast<size_t>(r)];
                             const double* gr = g + r * cols;
                             const double* xr = xd + r * cols;
                             double dot = 0.0;
                             for (int64_t c = 0; c < cols; ++c) dot += gr[c] * xr[c];
                             const double coef = dot * inv * inv * inv;
                             double* xgr = xg + r * cols;
                             for (int64_t c = 0; c < cols; ++c)
                               xgr[c] += gr[c] * inv - xr[c] * coef;
                           }
                         });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x->value;
  if (xv.ndim() != 3) throw ValidationError("instance_norm: expected shape (batch, nodes, channels)");
  const int64_t b = xv.dim(0), n = xv.dim(1), c = xv.dim(2);
  if (gamma->value.numel() != c || beta->value.numel() != c)
    throw ValidationError("instance_norm: affine parameters must have one entry per channel");
  if (n == 0) throw ValidationError("instance_norm: empty node axis");
  Tensor out(xv.shape);
  std::vector<double> mu(static_cast<size_t>(b * c)), inv_s(static_cast<size_t>(b * c));
  const auto& kt = kernels::active();
  const double invn = 1.0 / static_cast<double>(n);
  for (int64_t bi = 0; bi < b; ++bi) {
    const double* xb = xv.ptr() + bi * n * c;
    double* mu_b = mu.data() + bi * c;
    double* is_b = inv_s.data() + bi * c;
    kt.accumulate_rows(xb, mu_b, n, c);
    for (int64_t ch = 0; ch < c; ++ch) mu_b[ch] *= invn;
    std::vector<double> var(static_cast<size_t>(c), 0.0);
    for (int64_t ni = 0; ni < n; ++ni) {
      const double* xr = xb + ni * c;
      for (int64_t ch = 0; ch < c; ++ch) {
        const double d = xr[ch] - mu_b[ch];
        var[static_cast<size_t>(ch)] += d * d;
      }
    }
    for (int64_t ch = 0; ch < c; ++ch)
      is_b[ch] = 1.0 / std::sqrt(var[static_cast<size_t>(ch)] * invn + eps);
    double* ob = out.ptr() + bi * n * c;
    const double* gm = gamma->value.ptr();
    const double* bt = beta->value.ptr();
    for (int64_t ni = 0; ni < n; ++ni) {
      const double* xr = xb + ni * c;
      double* orow = ob + ni * c;
      for (int64_t ch = 0; ch < c; ++ch)
        orow[ch] = gm[ch] * (xr[ch] - mu_b[ch]) * is_b[ch] + bt[ch];
    }
  }
  return x->tape->record(
      "instance_norm", std::move(out), {x, gamma, beta},
      [b, n, c, mu, inv_s, invn](Node& node) {
        const Var& x_ = node.inputs[0];
        const Var& gamma_ = node.inputs[1];
        const Var& beta_ = node.inputs[2];
        const double* g = node.grad.ptr();
        const double* xd = x_->value.ptr();
        const double* gm = gamma_->value.ptr();
        double* gg = gamma_->requires_grad ? gamma_->ensure_grad().ptr() : nullptr;
        double* bg = beta_->requires_grad ? beta_->ensure_grad().ptr() : nullptr;
        double* xg = x_->requires_grad ? x_->ensure_grad().ptr() : nullptr;
        std::vector<double> gsum(static_cast<size_t>(c)), gxsum(static_cast<size_t>(c));
        for (int64_t bi = 0; bi < b; ++bi) {
          const double* xb = xd + bi * n * c;
          const double* gb = g + bi * n * c;
          const double* mu_b = mu.data() + bi * c;
          const double* is_b = inv_s.data() + bi * c;
          std::fill(gsum.begin(), gsum.end(), 0.0);
          std::fill(gxsum.begin(), gxsum.end(), 0.0);
          for (int64_t ni = 0; ni < n; ++ni) {
            const double* xr = xb + ni * c;
            const double* gr = gb + ni * c;
            for (int64_t ch = 0; ch < c; ++ch) {
              const double xhat = (xr[ch] - mu_b[ch]) * is_b[ch];
              gsum[static_cast<size_t>(ch)] += gr[ch];
              gxsum[static_cast<size_t>(ch)] += gr[ch] * xhat;
            }
          }
          if (gg || bg) {
            for (int64_t ch = 0; ch < c; ++ch) {
              if (gg) gg[ch] += gxsum[static_cast<size_t>(ch)];
              if (bg) bg[ch] += gsum[static_cast<size_t>(ch)];
            }
          }
          if (xg) {
            double* xgb = xg + bi * n * c;
            for (int64_t ni = 0; ni < n; ++ni) {
              const double* xr = xb + ni * c;
              const double* gr = gb + ni * c;
              double* xgr = xgb + ni * c;
              for (int64_t ch = 0; ch < c; ++ch) {
                const double xhat = (xr[ch] - mu_b[ch]) * is_b[ch];
                xgr[ch] += gm[ch] * is_b[ch] *
                           (gr[ch] - gsum[static_cast<size_t>(ch)] * invn -
                            xhat * gxsum[static_cast<size_t>(ch)] * invn);
              }
            }
          }
        }
      });
}

Var gelu(const Var& x) {
  const Tensor& xv = x->value;
  Tensor out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) {
    const double v = xv.data[static_cast<size_t>(i)];
    out.data[static_cast<size_t>(i)] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return x->tape->record("gelu", std::move(out), {x}, [](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    double* xg = x_->ensure_grad().ptr();
    const double* g = node.grad.ptr();
    const double* xd = x_->value.ptr();
    for (int64_t i = 0; i < node.grad.numel(); ++i) {
      const double v = xd[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      xg[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var relu(const Var& x) {
  Tensor out(x->value.shape);
  kernels::active().relu(x->value.ptr(), out.ptr(), out.numel());
  return x->tape->record("relu", std::move(out), {x}, [](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    double* xg = x_->ensure_grad().ptr();
    const double* g = node.grad.ptr();
    const double* xd = x_->value.ptr();
    for (int64_t i = 0; i < node.grad.numel(); ++i) {
      if (xd[i] > 0.0) xg[i] += g[i];
    }
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x->value.shape);
  for (int64_t i = 0; i < out.numel(); ++i)
    out.data[static_cast<size_t>(i)] = 1.0 / (1.0 + std::exp(-x->value.data[static_cast<size_t>(i)]));
  return x->tape->record("sigmoid", std::move(out), {x}, [](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    double* xg = x_->ensure_grad().ptr();
    const double* g = node.grad.ptr();
    const double* y = node.value.ptr();
    for (int64_t i = 0; i < node.grad.numel(); ++i) xg[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var exp(const Var& x) {
  Tensor out(x->value.shape);
  for (int64_t i = 0; i < out.numel(); ++i)
    out.data[static_cast<size_t>(i)] = std::exp(x->value.data[static_cast<size_t>(i)]);
  return x->tape->record("exp", std::move(out), {x}, [](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    double* xg = x_->ensure_grad().ptr();
    const double* g = node.grad.ptr();
    const double* y = node.value.ptr();
    for (int64_t i = 0; i < node.grad.numel(); ++i) xg[i] += g[i] * y[i];
  });
}

Var softmax(const Var& x, int axis, const Var& temperature) {
  const Tensor& xv = x->value;
  if (temperature->value.numel() != 1)
    throw ValidationError("softmax: temperature must be scalar");
  const double t = temperature->value.data[0];
  if (!(t > 0.0)) throw ValidationError("softmax: temperature must be positive");
  const int ax = normalize_axis(axis, xv.ndim(), "softmax");
  const AxisSplit s = split_at(xv.shape, ax);
  if (s.d == 0) throw ValidationError("softmax: empty axis");
  Tensor out(xv.shape);
  const double inv_t = 1.0 / t;
  for (int64_t o = 0; o < s.outer; ++o) {
    const int64_t base = o * s.d * s.inner;
    for (int64_t i = 0; i < s.inner; ++i) {
      const double* xs = xv.ptr() + base + i;
      double* ys = out.ptr() + base + i;
      double mx = xs[0];
      for (int64_t d = 1; d < s.d; ++d) mx = std::max(mx, xs[d * s.inner]);
      for (int64_t d = 0; d < s.d; ++d) ys[d * s.inner] = std::exp((xs[d * s.inner] - mx) * inv_t);
      const double denom = kernels::invariant_unit_sum(ys, s.d, s.inner);
      const double inv_denom = 1.0 / denom;
      for (int64_t d = 0; d < s.d; ++d) ys[d * s.inner] *= inv_denom;
    }
  }
  return x->tape->record("softmax", std::move(out), {x, temperature}, [s, t](Node& node) {
    const Var& x_ = node.inputs[0];
    const Var& t_ = node.inputs[1];
    const double* g = node.grad.ptr();
    const double* y = node.value.ptr();
    const double* xd = x_->value.ptr();
    double* xg = x_->requires_grad ? x_->ensure_grad().ptr() : nullptr;
    const double inv_t = 1.0 / t;
    double dt = 0.0;
    for (int64_t o = 0; o < s.outer; ++o) {
      const int64_t base = o * s.d * s.inner;
      for (int64_t i = 0; i < s.inner; ++i) {
        const int64_t off = base + i;
        double dot = 0.0;
        for (int64_t d = 0; d < s.d; ++d) dot += g[off + d * s.inner] * y[off + d * s.inner];
        for (int64_t d = 0; d < s.d; ++d) {
          const int64_t j = off + d * s.inner;
          const double dz = y[j] * (g[j] - dot);
          if (xg) xg[j] += dz * inv_t;
          dt -= dz * xd[j] * inv_t * inv_t;
        }
      }
    }
    if (t_->requires_grad) t_->ensure_grad().data[0] += dt;
  });
}

Var embedding_lookup(const Var& table, const std::vector<int64_t>& indices,
                     const std::vector<int64_t>& index_shape) {
  const Tensor& tv = table->value;
  if (tv.ndim() != 2) throw ValidationError("embedding_lookup: table must be 2-D");
  const int64_t v = tv.dim(0);
  const int64_t e = tv.dim(1);
  if (Tensor::numel_of(index_shape) != static_cast<int64_t>(indices.size()))
    throw ValidationError("embedding_lookup: index shape does not match index count");
  for (int64_t idx : indices) {
    if (idx < 0 || idx >= v) throw ValidationError("embedding_lookup: index out of vocabulary");
  }
  std::vector<int64_t> out_shape = index_shape;
  out_shape.push_back(e);
  Tensor out(out_shape);
  for (size_t i = 0; i < indices.size(); ++i)
    std::memcpy(out.ptr() + static_cast<int64_t>(i) * e, tv.ptr() + indices[i] * e,
                static_cast<size_t>(e) * sizeof(double));
  return table->tape->record("embedding_lookup", std::move(out), {table}, [indices, e](Node& node) {
    const Var& t_ = node.inputs[0];
    if (!t_->requires_grad) return;
    const auto& k = kernels::active();
    double* tg = t_->ensure_grad().ptr();
    const double* g = node.grad.ptr();
    for (size_t i = 0; i < indices.size(); ++i)
      k.add_inplace(tg + indices[i] * e, g + static_cast<int64_t>(i) * e, e);
  });
}

Var reshape(const Var& x, std::vector<int64_t> shape) {
  if (Tensor::numel_of(shape) != x->value.numel())
    throw ValidationError("reshape: element count mismatch");
  Tensor out(std::move(shape), x->value.data);
  return x->tape->record("reshape", std::move(out), {x}, [](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    kernels::active().add_inplace(x_->ensure_grad().ptr(), node.grad.ptr(), node.grad.numel());
  });
}

Var expand_leading(const Var& x, int64_t n) {
  if (n < 1) throw ValidationError("expand_leading: count must be positive");
  const int64_t block = x->value.numel();
  std::vector<int64_t> out_shape;
  out_shape.push_back(n);
  out_shape.insert(out_shape.end(), x->value.shape.begin(), x->value.shape.end());
  Tensor out(out_shape);
  for (int64_t i = 0; i < n; ++i)
    std::memcpy(out.ptr() + i * block, x->value.ptr(), static_cast<size_t>(block) * sizeof(double));
  return x->tape->record("expand_leading", std::move(out), {x}, [n, block](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    kernels::active().accumulate_rows(node.grad.ptr(), x_->ensure_grad().ptr(), n, block);
  });
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x->value.data) s += v;
  return x->tape->record("sum_all", Tensor::scalar(s), {x}, [](Node& node) {
    const Var& x_ = node.inputs[0];
    if (!x_->requires_grad) return;
    const double g = node.grad.data[0];
    double* xg = x_->ensure_grad().ptr();
    for (int64_t i = 0; i < x_->value.numel(); ++i) xg[i] += g;
  });
}

}  // namespace tgraph
