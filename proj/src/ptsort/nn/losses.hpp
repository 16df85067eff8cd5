// Copyright 2026 The ptsort Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <span>

#include "ptsort/nn/matrix.hpp"

namespace ptsort::nn {

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Mean over rows of -log softmax(logits)[label]; grad is
/// (softmax - onehot) / rows. Max-subtracted for stability.
LossAndGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

double sigmoid(double x);

/// f(x, grad): returns the value at x; fills `grad` with the analytical
/// gradient when it is non-empty.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences at step h against the analytical gradient;
/// per-coordinate error is |a - n| / max(1e-12, |a| + |n|).
GradCheckResult grad_check(const Objective& f, std::span<const double> point,
                           double h = 1e-5);

}  // namespace ptsort::nn
