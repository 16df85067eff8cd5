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

#include <cstdint>
#include <vector>

#include "ptsort/nn/tensor.hpp"

namespace ptsort::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.05;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// Decoupled weight decay Adam with bias correction:
///   p <- p - lr * wd * p
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// Moments are allocated on the first call and shape-checked afterwards.
void adamw_step(const TensorList& params, const TensorList& grads, AdamState& state,
                double lr);

struct OneCycleConfig {
  double max_lr = 0.006;
  double warmup_fraction = 0.1;
  double div_factor = 25.0;
  double final_div_factor = 1000.0;
};

/// Cosine ramp from max_lr / div_factor to max_lr over the first
/// warmup_fraction * total_steps steps, then cosine decay to
/// max_lr / final_div_factor at total_steps. Exactly max_lr at the peak.
double one_cycle_lr(std::uint64_t step, std::uint64_t total_steps,
                    const OneCycleConfig& config);

}  // namespace ptsort::nn
