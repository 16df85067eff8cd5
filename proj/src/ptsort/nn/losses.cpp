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

#include "ptsort/nn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ptsort/error.hpp"

namespace ptsort::nn {

LossAndGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  require(labels.size() == logits.rows(), "cross entropy: one label per row required");
  require(logits.rows() >= 1, "cross entropy: empty batch");
  const std::size_t classes = logits.cols();
  LossAndGrad out{0.0, Matrix(logits.rows(), classes)};
  const double inv_rows = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int label = labels[r];
    require(label >= 0 && static_cast<std::size_t>(label) < classes,
            "cross entropy: label out of range at row " + std::to_string(r));
    auto z = logits.row(r);
    const double peak = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - peak);
    const double log_denom = std::log(denom);
    out.loss -= (z[static_cast<std::size_t>(label)] - peak - log_denom);
    auto g = out.grad.row(r);
    for (std::size_t c = 0; c < classes; ++c) {
      g[c] = std::exp(z[c] - peak - log_denom) * inv_rows;
    }
    g[static_cast<std::size_t>(label)] -= inv_rows;
  }
  out.loss *= inv_rows;
  if (!std::isfinite(out.loss)) throw Error(ErrorCode::kNumeric, "cross entropy is not finite");
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

GradCheckResult grad_check(const Objective& f, std::span<const double> point, double h) {
  require(h > 0.0, "grad_check: step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> analytic(x.size(), 0.0);
  const double f0 = f(x, analytic);
  if (!std::isfinite(f0)) throw Error(ErrorCode::kNumeric, "grad_check: f is not finite");

  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x, {});
    x[i] = saved - h;
    const double down = f(x, {});
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[i])) {
      throw Error(ErrorCode::kNumeric, "grad_check: non-finite evaluation at coordinate " +
                                           std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
    if (err > result.max_relative_error || i == 0) {
      result = {std::max(err, result.max_relative_error), i, analytic[i], numeric};
    }
  }
  return result;
}

}  // namespace ptsort::nn
