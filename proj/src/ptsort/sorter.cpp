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

#include "ptsort/sorter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptsort/error.hpp"
#include "ptsort/nn/losses.hpp"

namespace ptsort::sorter {

namespace {

void check_scores(std::span<const double> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw Error(ErrorCode::kNumeric, "score " + std::to_string(i) + " is not finite");
    }
  }
}

}  // namespace

void SorterConfig::validate() const {
  require(!hidden.empty(), "sorter needs at least one hidden layer");
  for (std::size_t w : hidden) require(w >= 1, "sorter hidden widths must be positive");
  require(k >= 1, "sorter.k must be at least 1");
  require(local_weight >= 0.0 && dist_weight >= 0.0, "sorter loss weights must be >= 0");
}

nn::Matrix sorter_inputs(const geometry::PointCloud& cloud) {
  cloud.validate();
  const std::size_t n = cloud.size();
  geometry::Vec3 lo = cloud.positions[0], hi = lo, mean{0.0, 0.0, 0.0};
  for (const auto& p : cloud.positions) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
      mean[a] += p[a];
    }
  }
  double extent = 0.0;
  for (int a = 0; a < 3; ++a) {
    mean[a] /= static_cast<double>(n);
    extent = std::max(extent, hi[a] - lo[a]);
  }
  const double scale = extent > 0.0 ? 1.0 / extent : 1.0;
  nn::Matrix x(n, 3 + cloud.feature_count);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x.row(i);
    for (int a = 0; a < 3; ++a) row[a] = (cloud.positions[i][a] - mean[a]) * scale;
    auto f = cloud.feature_row(i);
    std::copy(f.begin(), f.end(), row.begin() + 3);
  }
  return x;
}

nn::MlpParams make_sorter(std::size_t feature_count, const SorterConfig& config, Rng& rng) {
  config.validate();
  std::vector<std::size_t> dims{3 + feature_count};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(1);
  return nn::make_mlp(dims, true, rng);
}

Scores score_points(nn::MlpParams& params, const geometry::PointCloud& cloud,
                    nn::Mode mode, bool update_running_stats) {
  require(params.output_width() == 1, "sorter must emit one value per point");
  auto fw = nn::mlp_forward(params, sorter_inputs(cloud), mode, update_running_stats);
  Scores out;
  out.values.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out.values[i] = nn::sigmoid(fw.outputs(i, 0));
  }
  out.cache = std::move(fw.cache);
  return out;
}

std::vector<double> infer_scores(const nn::MlpParams& params,
                                 const geometry::PointCloud& cloud) {
  const nn::Matrix logits = nn::mlp_infer(params, sorter_inputs(cloud));
  std::vector<double> s(cloud.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = nn::sigmoid(logits(i, 0));
  return s;
}

nn::MlpBackward score_backward(const nn::MlpParams& params, const Scores& scores,
                               std::span<const double> grad_scores) {
  require(grad_scores.size() == scores.values.size(), "score gradient length mismatch");
  nn::Matrix g(grad_scores.size(), 1);
  for (std::size_t i = 0; i < grad_scores.size(); ++i) {
    const double s = scores.values[i];
    g(i, 0) = grad_scores[i] * s * (1.0 - s);
  }
  return nn::mlp_backward(params, scores.cache, g);
}

curves::Permutation scores_to_permutation(std::span<const double> scores) {
  check_scores(scores);
  curves::Permutation perm = curves::Permutation::identity(scores.size());
  std::stable_sort(perm.order.begin(), perm.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return perm;
}

LossGrad locality_loss(std::span<const double> scores,
                       const geometry::NeighborTable& neighbors) {
  const std::size_t n = scores.size();
  require(n >= 2, "locality loss needs at least two points");
  require(neighbors.size() == n, "neighbor table does not match score count");
  check_scores(scores);
  LossGrad out{0.0, std::vector<double>(n, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : neighbors.row(i)) {
      require(j < n, "neighbor index out of range");
      if (j == i) fail("point " + std::to_string(i) + " lists itself as a neighbor");
      const double d = scores[i] - scores[j];
      out.loss += d * d;
      out.grad[i] += 2.0 * d * inv_n;
      out.grad[j] -= 2.0 * d * inv_n;
    }
  }
  out.loss *= inv_n;
  return out;
}

LossGrad distribution_loss(std::span<const double> scores, bool one_based_ramp) {
  const std::size_t n = scores.size();
  require(n >= 1, "distribution loss needs at least one point");
  const curves::Permutation order = scores_to_permutation(scores);
  LossGrad out{0.0, std::vector<double>(n, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t j = order.order[rank];
    const double target =
        static_cast<double>(one_based_ramp ? rank + 1 : rank) * inv_n;
    const double d = scores[j] - target;
    out.loss += d * d;
    out.grad[j] = 2.0 * d * inv_n;
  }
  out.loss *= inv_n;
  return out;
}

OrderingLoss ordering_loss(std::span<const double> scores,
                           const geometry::NeighborTable& neighbors,
                           const SorterConfig& config) {
  const LossGrad local = locality_loss(scores, neighbors);
  const LossGrad dist = distribution_loss(scores, config.one_based_ramp);
  OrderingLoss out;
  out.local = local.loss;
  out.dist = dist.loss;
  out.total = config.local_weight * local.loss + config.dist_weight * dist.loss;
  out.grad.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.grad[i] = config.local_weight * local.grad[i] + config.dist_weight * dist.grad[i];
  }
  return out;
}

double score_stddev(std::span<const double> scores) {
  require(!scores.empty(), "score_stddev: empty input");
  const double n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : scores) ss += (s - mean) * (s - mean);
  return std::sqrt(ss / n);
}

double ks_distance_to_uniform(std::span<const double> scores) {
  require(!scores.empty(), "ks distance: empty input");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::clamp(sorted[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
  }
  return d;
}

}  // namespace ptsort::sorter
