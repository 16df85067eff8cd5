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

#include "ptsort/nn/optim.hpp"

#include <cmath>
#include <numbers>

#include "ptsort/error.hpp"

namespace ptsort::nn {

void adamw_step(const TensorList& params, const TensorList& grads, AdamState& state,
                double lr) {
  require(lr > 0.0 && std::isfinite(lr), "adamw: learning rate must be positive");
  require(params.size() == grads.size(), "adamw: parameter/gradient count mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t].values.size() == grads[t].values.size(),
            "adamw: shape mismatch for " + params[t].name);
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  }
  require(state.first_moment.size() == params.size(), "adamw: optimizer state mismatch");
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(state.first_moment[t].size() == params[t].values.size(),
            "adamw: optimizer state shape mismatch for " + params[t].name);
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, step);
  const double correction2 = 1.0 - std::pow(c.beta2, step);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t].values;
    auto g = grads[t].values;
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] -= lr * c.weight_decay * p[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

double one_cycle_lr(std::uint64_t step, std::uint64_t total_steps,
                    const OneCycleConfig& config) {
  require(total_steps >= 1, "one_cycle_lr: total steps must be positive");
  require(step <= total_steps, "one_cycle_lr: step beyond schedule");
  require(config.max_lr > 0.0, "one_cycle_lr: max_lr must be positive");
  require(config.warmup_fraction > 0.0 && config.warmup_fraction < 1.0,
          "one_cycle_lr: warmup fraction must lie in (0, 1)");
  require(config.div_factor > 1.0 && config.final_div_factor > 1.0,
          "one_cycle_lr: divisors must exceed 1");

  const double max_lr = config.max_lr;
  const double initial = max_lr / config.div_factor;
  const double final_lr = max_lr / config.final_div_factor;
  const double peak = config.warmup_fraction * static_cast<double>(total_steps);
  const double s = static_cast<double>(step);
  if (s <= peak) {
    const double pct = s / peak;
    return max_lr + (initial - max_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * pct));
  }
  const double pct = (s - peak) / (static_cast<double>(total_steps) - peak);
  return max_lr - (max_lr - final_lr) * 0.5 * (1.0 - std::cos(std::numbers::pi * pct));
}

}  // namespace ptsort::nn
