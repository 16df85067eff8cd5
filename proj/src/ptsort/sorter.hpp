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

#include <cstddef>
#include <span>
#include <vector>

#include "ptsort/curves.hpp"
#include "ptsort/geometry.hpp"
#include "ptsort/nn/mlp.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::sorter {

struct SorterConfig {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t k = 24;
  double local_weight = 1.0;
  double dist_weight = 1.0;
  // Ramp t_i = i/N for i in 1..N; false selects i in 0..N-1.
  bool one_based_ramp = true;

  void validate() const;
};

/// Rows of [normalized xyz | features]. Coordinates are shifted to zero mean
/// and divided by the largest bounding-box side.
nn::Matrix sorter_inputs(const geometry::PointCloud& cloud);

nn::MlpParams make_sorter(std::size_t feature_count, const SorterConfig& config, Rng& rng);

struct Scores {
  std::vector<double> values;
  nn::MlpCache cache;
};

/// s_i = sigmoid(MLP([x_i | h_i])).
Scores score_points(nn::MlpParams& params, const geometry::PointCloud& cloud,
                    nn::Mode mode, bool update_running_stats = true);

/// Eval-mode scores; leaves the parameters untouched.
std::vector<double> infer_scores(const nn::MlpParams& params,
                                 const geometry::PointCloud& cloud);

/// Chains d(loss)/d(score) through the sigmoid and the MLP.
nn::MlpBackward score_backward(const nn::MlpParams& params, const Scores& scores,
                               std::span<const double> grad_scores);

/// Stable ascending argsort.
curves::Permutation scores_to_permutation(std::span<const double> scores);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// (1/N) sum_i sum_{j in N_k(i)} (s_i - s_j)^2. Not divided by k.
LossGrad locality_loss(std::span<const double> scores,
                       const geometry::NeighborTable& neighbors);

/// (1/N) sum_i (sort(s)_i - t_i)^2 with the gradient taken through the sort
/// as a fixed permutation: d/ds_j = (2/N) (s_j - t_rank(j)).
LossGrad distribution_loss(std::span<const double> scores, bool one_based_ramp = true);

struct OrderingLoss {
  double local = 0.0;
  double dist = 0.0;
  double total = 0.0;
  std::vector<double> grad;
};

/// local_weight * L_local + dist_weight * L_dist; defaults give the plain sum.
OrderingLoss ordering_loss(std::span<const double> scores,
                           const geometry::NeighborTable& neighbors,
                           const SorterConfig& config = {});

double score_stddev(std::span<const double> scores);

/// Kolmogorov-Smirnov distance between the empirical CDF of `scores` and
/// Uniform(0, 1).
double ks_distance_to_uniform(std::span<const double> scores);

}  // namespace ptsort::sorter
