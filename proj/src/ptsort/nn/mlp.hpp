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
#include <string>
#include <vector>

#include "ptsort/nn/matrix.hpp"
#include "ptsort/nn/tensor.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::nn {

enum class Mode { kTrain, kEval };

/// y = x * weight + bias, weight is (in x out). An empty bias means none.
struct Linear {
  Matrix weight;
  std::vector<double> bias;
};

struct BatchNorm {
  static constexpr double kEpsilon = 1e-5;

  std::vector<double> gain;
  std::vector<double> shift;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
};

/// Stack of [linear -> batch-norm -> GELU] hidden layers and a final linear
/// layer without activation. Hidden linears feeding a batch-norm carry no
/// bias: the normalization removes any per-channel offset, so such a bias
/// would have an identically zero gradient.
struct MlpParams {
  std::vector<std::size_t> dims;
  bool batch_norm = true;
  std::vector<Linear> layers;
  std::vector<BatchNorm> norms;

  std::size_t input_width() const { return dims.front(); }
  std::size_t output_width() const { return dims.back(); }

  TensorList trainable(const std::string& prefix);
  TensorList buffers(const std::string& prefix);
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; batch-norm
/// gain 1, shift 0, running stats (0, 1).
MlpParams make_mlp(const std::vector<std::size_t>& dims, bool batch_norm, Rng& rng);

/// Same structure, every value zero (gradient accumulator).
MlpParams zeros_like(const MlpParams& params);

struct MlpCache {
  Mode mode = Mode::kTrain;
  std::size_t batch = 0;
  std::vector<Matrix> layer_inputs;
  std::vector<Matrix> normalized;
  std::vector<std::vector<double>> inv_std;
  std::vector<Matrix> pre_activation;
};

struct MlpForward {
  Matrix outputs;
  MlpCache cache;
};

/// Train mode normalizes with batch statistics and, when requested, folds
/// them into the running statistics; eval mode uses the running statistics.
MlpForward mlp_forward(MlpParams& params, const Matrix& inputs, Mode mode,
                       bool update_running_stats = true);

/// Eval-mode forward without touching the parameters.
Matrix mlp_infer(const MlpParams& params, const Matrix& inputs);

struct MlpBackward {
  MlpParams grads;
  Matrix grad_inputs;
};

MlpBackward mlp_backward(const MlpParams& params, const MlpCache& cache,
                         const Matrix& grad_outputs);

// tanh-approximation GELU and its exact derivative.
double gelu(double x);
double gelu_derivative(double x);

}  // namespace ptsort::nn
