// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tgraph/gradcheck.hpp"

#include <cmath>

#include "tgraph/model.hpp"
#include "tgraph/rng.hpp"

namespace tgraph {

GradCheckReport gradcheck_one(const std::string& name, const GradBuildFn& build,
                              const std::vector<Tensor>& inputs, double tolerance, uint64_t seed,
                              double step) {
  Tensor projection;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t, /*requires_grad=*/true));
    Var out = build(tape, leaves);
    projection = Tensor(out->value.shape);
    Rng rng(derive_seed(seed, "gradcheck-projection"));
    for (double& v : projection.data) v = rng.next_normal();
    Var loss = sum_all(mul(out, tape.leaf(projection)));
    tape.backward(loss);

    GradCheckReport report;
    report.name = name;
    report.tolerance = tolerance;

    auto eval = [&](const std::vector<Tensor>& xs) {
      Tape t2;
      std::vector<Var> ls;
      for (const Tensor& t : xs) ls.push_back(t2.leaf(t, /*requires_grad=*/false));
      Var o = build(t2, ls);
      double s = 0.0;
      for (int64_t i = 0; i < o->value.numel(); ++i)
        s += o->value.data[static_cast<size_t>(i)] * projection.data[static_cast<size_t>(i)];
      return s;
    };

    std::vector<Tensor> xs = inputs;
    for (size_t li = 0; li < leaves.size(); ++li) {
      const Tensor& analytic = leaves[li]->grad;
      for (int64_t j = 0; j < inputs[li].numel(); ++j) {
        const double saved = xs[li].data[static_cast<size_t>(j)];
        xs[li].data[static_cast<size_t>(j)] = saved + step;
        const double lp = eval(xs);
        xs[li].data[static_cast<size_t>(j)] = saved - step;
        const double lm = eval(xs);
        xs[li].data[static_cast<size_t>(j)] = saved;
        const double numeric = (lp - lm) / (2.0 * step);
        const double ana =
            analytic.data.empty() ? 0.0 : analytic.data[static_cast<size_t>(j)];
        const double err = std::abs(numeric - ana) /
                           std::max({1.0, std::abs(numeric), std::abs(ana)});
        report.max_rel_err = std::max(report.max_rel_err, err);
      }
    }
    report.pass = report.max_rel_err < tolerance;
    return report;
  }
}

namespace {

Tensor randn(Rng& rng, std::vector<int64_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * rng.next_normal();
  return t;
}

// Keeps relu inputs away from the kink at 0.
Tensor randn_offset(Rng& rng, std::vector<int64_t> shape) {
  Tensor t = randn(rng, std::move(shape));
  for (double& v : t.data) v += std::copysign(0.1, v);
  return t;
}

constexpr double kOpTol = 1e-5;
constexpr double kBlockTol = 1e-4;

}  // namespace

std::vector<GradCheckReport> gradcheck_suite(uint64_t seed) {
  std::vector<GradCheckReport> reports;
  auto check = [&](const std::string& name, const GradBuildFn& build, std::vector<Tensor> inputs,
                   double tol) {
    reports.push_back(gradcheck_one(name, build, inputs, tol, derive_seed(seed, name)));
  };
  Rng rng(seed, "gradcheck-inputs");

  check("matmul",
        [](Tape&, const std::vector<Var>& in) { return matmul(in[0], in[1]); },
        {randn(rng, {3, 5, 4}), randn(rng, {4, 6})}, kOpTol);
  check("add",
        [](Tape&, const std::vector<Var>& in) { return add(in[0], in[1]); },
        {randn(rng, {4, 5}), randn(rng, {4, 5})}, kOpTol);
  check("add_broadcast",
        [](Tape&, const std::vector<Var>& in) { return add(in[0], in[1]); },
        {randn(rng, {3, 4, 5}), randn(rng, {5})}, kOpTol);
  check("mul",
        [](Tape&, const std::vector<Var>& in) { return mul(in[0], in[1]); },
        {randn(rng, {4, 5}), randn(rng, {4, 5})}, kOpTol);
  check("concat_last",
        [](Tape&, const std::vector<Var>& in) { return concat({in[0], in[1]}, -1); },
        {randn(rng, {3, 4, 2}), randn(rng, {3, 4, 3})}, kOpTol);
  check("concat_axis0",
        [](Tape&, const std::vector<Var>& in) { return concat({in[0], in[1]}, 0); },
        {randn(rng, {2, 4}), randn(rng, {3, 4})}, kOpTol);
  check("gather_rows",
        [](Tape&, const std::vector<Var>& in) {
          return gather_rows(in[0], {0, 2, 2, 4, 1});
        },
        {randn(rng, {2, 5, 3})}, kOpTol);
  check("segment_sum",
        [](Tape&, const std::vector<Var>& in) {
          return segment_sum(in[0], {1, 0, 3, 1, 0}, 4);
        },
        {randn(rng, {2, 5, 3})}, kOpTol);
  check("mean_nodes",
        [](Tape&, const std::vector<Var>& in) { return mean(in[0], 1); },
        {randn(rng, {3, 5, 4})}, kOpTol);
  check("l2_normalize",
        [](Tape&, const std::vector<Var>& in) { return l2_normalize(in[0], -1, 1e-12); },
        {randn(rng, {4, 5})}, kOpTol);
  check("instance_norm",
        [](Tape&, const std::vector<Var>& in) {
          return instance_norm(in[0], in[1], in[2], 1e-5);
        },
        {randn(rng, {2, 5, 4}), randn(rng, {4}), randn(rng, {4})}, kOpTol);
  check("gelu", [](Tape&, const std::vector<Var>& in) { return gelu(in[0]); },
        {randn(rng, {4, 5})}, kOpTol);
  check("relu", [](Tape&, const std::vector<Var>& in) { return relu(in[0]); },
        {randn_offset(rng, {4, 5})}, kOpTol);
  check("sigmoid", [](Tape&, const std::vector<Var>& in) { return sigmoid(in[0]); },
        {randn(rng, {4, 5})}, kOpTol);
  check("exp", [](Tape&, const std::vector<Var>& in) { return exp(in[0]); },
        {randn(rng, {4, 5})}, kOpTol);
  check("softmax_batch_axis",
        [](Tape&, const std::vector<Var>& in) { return softmax(in[0], 0, in[1]); },
        {randn(rng, {6, 5, 4}), Tensor::scalar(0.8)}, kOpTol);
  check("embedding_lookup",
        [](Tape&, const std::vector<Var>& in) {
          return embedding_lookup(in[0], {0, 3, 1, 3, 6, 2}, {6});
        },
        {randn(rng, {7, 4})}, kOpTol);
  check("reshape",
        [](Tape&, const std::vector<Var>& in) { return reshape(in[0], {5, 4}); },
        {randn(rng, {4, 5})}, kOpTol);
  check("expand_leading",
        [](Tape&, const std::vector<Var>& in) { return expand_leading(in[0], 4); },
        {randn(rng, {3, 5})}, kOpTol);
  check("sum_all", [](Tape&, const std::vector<Var>& in) { return sum_all(in[0]); },
        {randn(rng, {4, 5})}, kOpTol);

  // Composed conv block: batch 3, 4 nodes, C=8, SE reduction 4, edges on.
  const std::vector<int64_t> srcs{0, 1, 1, 2, 3, 0, 2, 1};
  const std::vector<int64_t> dsts{1, 0, 2, 1, 0, 3, 3, 3};
  check("conv_block",
        [srcs, dsts](Tape&, const std::vector<Var>& in) {
          ConvBlockVars vars;
          vars.norm_gamma = in[1];
          vars.norm_beta = in[2];
          vars.f1_w = in[3];
          vars.f1_b = in[4];
          vars.f2_w = in[5];
          vars.f2_b = in[6];
          vars.se_excitation_w = in[7];
          vars.se_excitation_b = in[8];
          vars.se_squeeze_w = in[9];
          vars.se_squeeze_b = in[10];
          vars.log_temperature = in[11];
          return conv_block(in[0], srcs, dsts, 4, vars, true, true, true);
        },
        {randn(rng, {3, 4, 8}), randn(rng, {8}, 0.3), randn(rng, {8}, 0.3),
         randn(rng, {8, 4}, 0.5), randn(rng, {4}, 0.3), randn(rng, {12, 4}, 0.5),
         randn(rng, {4}, 0.3), randn(rng, {4, 1}, 0.5), randn(rng, {1}, 0.3),
         randn(rng, {1, 4}, 0.5), randn(rng, {4}, 0.3), Tensor::scalar(0.1)},
        kBlockTol);

  return reports;
}

bool all_pass(const std::vector<GradCheckReport>& reports) {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return true;
}

}  // namespace tgraph
