// Copyright (c) 2026 The tgraph Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Central-difference gradient checking for every autodiff op and for one
// full graph convolutional block. Shared by the test suites and the
// `tgraph gradcheck` command.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tgraph/autodiff.hpp"

namespace tgraph {

struct GradCheckReport {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

using GradBuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Output is scalarized against a fixed random projection; every element of
// every input is perturbed by +-step and compared against the accumulated
// analytic gradient. Relative error uses a unit floor:
// |a - n| / max(1, |a|, |n|).
GradCheckReport gradcheck_one(const std::string& name, const GradBuildFn& build,
                              const std::vector<Tensor>& inputs, double tolerance, uint64_t seed,
                              double step = 1e-4);

// Ops at 1e-5, the composed conv block at 1e-4, double precision,
// shapes <= 6x5x4.
std::vector<GradCheckReport> gradcheck_suite(uint64_t seed);

bool all_pass(const std::vector<GradCheckReport>& reports);

}  // namespace tgraph
