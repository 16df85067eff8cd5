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

#include "ptsort/nn/mlp.hpp"

#include <cmath>
#include <numbers>

#include "ptsort/error.hpp"

namespace ptsort::nn {

namespace {

constexpr double kGeluCoeff = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

std::size_t hidden_count(const MlpParams& p) { return p.layers.size() - 1; }

Matrix linear_forward(const Linear& layer, const Matrix& x) {
  Matrix y = matmul(x, layer.weight);
  if (!layer.bias.empty()) add_row_vector(y, layer.bias);
  return y;
}

void check_structure(const MlpParams& p) {
  require(p.dims.size() >= 2, "mlp needs at least one layer");
  require(p.layers.size() == p.dims.size() - 1, "mlp layer count mismatch");
  require(!p.batch_norm || p.norms.size() == hidden_count(p),
          "mlp batch-norm count mismatch");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    require(p.layers[l].weight.rows() == p.dims[l] &&
                p.layers[l].weight.cols() == p.dims[l + 1],
            "mlp layer " + std::to_string(l) + " has the wrong shape");
  }
}

}  // namespace

double gelu(double x) {
  const double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kSqrt2OverPi * (x + kGeluCoeff * x * x * x);
  const double t = std::tanh(u);
  const double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoeff * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

TensorList MlpParams::trainable(const std::string& prefix) {
  TensorList out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base = prefix + ".linear" + std::to_string(l);
    out.push_back({base + ".weight", {dims[l], dims[l + 1]}, layers[l].weight.values()});
    if (!layers[l].bias.empty()) {
      out.push_back({base + ".bias", {dims[l + 1]}, layers[l].bias});
    }
    if (batch_norm && l < norms.size()) {
      const std::string bn = prefix + ".norm" + std::to_string(l);
      out.push_back({bn + ".gain", {dims[l + 1]}, norms[l].gain});
      out.push_back({bn + ".shift", {dims[l + 1]}, norms[l].shift});
    }
  }
  return out;
}

TensorList MlpParams::buffers(const std::string& prefix) {
  TensorList out;
  for (std::size_t l = 0; l < norms.size(); ++l) {
    const std::string bn = prefix + ".norm" + std::to_string(l);
    out.push_back({bn + ".running_mean", {dims[l + 1]}, norms[l].running_mean});
    out.push_back({bn + ".running_var", {dims[l + 1]}, norms[l].running_var});
  }
  return out;
}

MlpParams make_mlp(const std::vector<std::size_t>& dims, bool batch_norm, Rng& rng) {
  require(dims.size() >= 2, "mlp needs at least one layer");
  for (std::size_t d : dims) require(d > 0, "mlp widths must be positive");
  MlpParams p;
  p.dims = dims;
  p.batch_norm = batch_norm;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const bool last = l + 2 == dims.size();
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    Linear layer{Matrix(dims[l], dims[l + 1]), {}};
    for (double& w : layer.weight.values()) w = rng.uniform(-bound, bound);
    if (last || !batch_norm) {
      layer.bias.resize(dims[l + 1]);
      for (double& b : layer.bias) b = rng.uniform(-bound, bound);
    }
    p.layers.push_back(std::move(layer));
    if (!last && batch_norm) {
      const std::size_t w = dims[l + 1];
      p.norms.push_back({std::vector<double>(w, 1.0), std::vector<double>(w, 0.0),
                         std::vector<double>(w, 0.0), std::vector<double>(w, 1.0)});
    }
  }
  return p;
}

MlpParams zeros_like(const MlpParams& params) {
  MlpParams z = params;
  for (auto& layer : z.layers) {
    for (double& w : layer.weight.values()) w = 0.0;
    for (double& b : layer.bias) b = 0.0;
  }
  for (auto& n : z.norms) {
    for (auto* v : {&n.gain, &n.shift, &n.running_mean, &n.running_var}) {
      for (double& x : *v) x = 0.0;
    }
  }
  return z;
}

MlpForward mlp_forward(MlpParams& params, const Matrix& inputs, Mode mode,
                       bool update_running_stats) {
  check_structure(params);
  require(inputs.cols() == params.input_width(),
          "mlp input width " + std::to_string(inputs.cols()) + " != " +
              std::to_string(params.input_width()));
  require(inputs.rows() >= 1, "mlp input batch is empty");
  const bool train = mode == Mode::kTrain;
  require(!(train && params.batch_norm && hidden_count(params) > 0 && inputs.rows() < 2),
          "batch-norm in train mode needs a batch of at least 2");

  MlpForward fw;
  MlpCache& cache = fw.cache;
  cache.mode = mode;
  cache.batch = inputs.rows();
  const std::size_t n = inputs.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix x = inputs;
  for (std::size_t l = 0; l < hidden_count(params); ++l) {
    Matrix z = linear_forward(params.layers[l], x);
    cache.layer_inputs.push_back(std::move(x));
    if (params.batch_norm) {
      BatchNorm& bn = params.norms[l];
      const std::size_t w = z.cols();
      std::vector<double> mean(w, 0.0), var(w, 0.0), inv_std(w);
      if (train) {
        add_column_sums(z, mean);
        for (double& m : mean) m *= inv_n;
        for (std::size_t r = 0; r < n; ++r) {
          auto row = z.row(r);
          for (std::size_t c = 0; c < w; ++c) {
            const double d = row[c] - mean[c];
            var[c] += d * d;
          }
        }
        for (double& v : var) v *= inv_n;
      } else {
        mean = bn.running_mean;
        var = bn.running_var;
      }
      for (std::size_t c = 0; c < w; ++c) {
        inv_std[c] = 1.0 / std::sqrt(var[c] + BatchNorm::kEpsilon);
      }
      Matrix xhat(n, w);
      for (std::size_t r = 0; r < n; ++r) {
        auto zr = z.row(r);
        auto hr = xhat.row(r);
        for (std::size_t c = 0; c < w; ++c) {
          hr[c] = (zr[c] - mean[c]) * inv_std[c];
          zr[c] = bn.gain[c] * hr[c] + bn.shift[c];
        }
      }
      if (train && update_running_stats) {
        const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
        for (std::size_t c = 0; c < w; ++c) {
          bn.running_mean[c] = (1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mean[c];
          bn.running_var[c] =
              (1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * var[c] * unbias;
        }
      }
      cache.normalized.push_back(std::move(xhat));
      cache.inv_std.push_back(std::move(inv_std));
    }
    Matrix a = z;
    for (double& v : a.values()) v = gelu(v);
    cache.pre_activation.push_back(std::move(z));
    x = std::move(a);
  }
  fw.outputs = linear_forward(params.layers.back(), x);
  cache.layer_inputs.push_back(std::move(x));
  if (!all_finite(fw.outputs)) throw Error(ErrorCode::kNumeric, "mlp produced non-finite output");
  return fw;
}

Matrix mlp_infer(const MlpParams& params, const Matrix& inputs) {
  MlpParams copy = params;
  return mlp_forward(copy, inputs, Mode::kEval).outputs;
}

MlpBackward mlp_backward(const MlpParams& params, const MlpCache& cache,
                         const Matrix& grad_outputs) {
  check_structure(params);
  const std::size_t hidden = hidden_count(params);
  require(cache.layer_inputs.size() == params.layers.size() &&
              cache.pre_activation.size() == hidden &&
              (!params.batch_norm || cache.normalized.size() == hidden),
          "mlp cache does not match parameters");
  require(grad_outputs.rows() == cache.batch &&
              grad_outputs.cols() == params.output_width(),
          "mlp upstream gradient has the wrong shape");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    require(cache.layer_inputs[l].rows() == cache.batch &&
                cache.layer_inputs[l].cols() == params.dims[l],
            "mlp cache is stale");
  }

  MlpBackward bw{zeros_like(params), {}};
  const std::size_t n = cache.batch;
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix g = grad_outputs;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    if (l < hidden) {
      const Matrix& pre = cache.pre_activation[l];
      auto gv = g.values();
      auto pv = pre.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= gelu_derivative(pv[i]);
      if (params.batch_norm) {
        const BatchNorm& bn = params.norms[l];
        BatchNorm& dbn = bw.grads.norms[l];
        const Matrix& xhat = cache.normalized[l];
        const auto& inv_std = cache.inv_std[l];
        const std::size_t w = g.cols();
        std::vector<double> sum_dxhat(w, 0.0), sum_dxhat_xhat(w, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
          auto gr = g.row(r);
          auto hr = xhat.row(r);
          for (std::size_t c = 0; c < w; ++c) {
            dbn.gain[c] += gr[c] * hr[c];
            dbn.shift[c] += gr[c];
            const double dxhat = gr[c] * bn.gain[c];
            gr[c] = dxhat;
            sum_dxhat[c] += dxhat;
            sum_dxhat_xhat[c] += dxhat * hr[c];
          }
        }
        for (std::size_t r = 0; r < n; ++r) {
          auto gr = g.row(r);
          auto hr = xhat.row(r);
          for (std::size_t c = 0; c < w; ++c) {
            if (cache.mode == Mode::kTrain) {
              gr[c] = inv_std[c] *
                      (gr[c] - inv_n * sum_dxhat[c] - hr[c] * inv_n * sum_dxhat_xhat[c]);
            } else {
              gr[c] *= inv_std[c];
            }
          }
        }
      }
    }
    const Linear& layer = params.layers[l];
    Linear& dlayer = bw.grads.layers[l];
    dlayer.weight = matmul_at_b(cache.layer_inputs[l], g);
    if (!layer.bias.empty()) add_column_sums(g, dlayer.bias);
    g = matmul_a_bt(g, layer.weight);
  }
  bw.grad_inputs = std::move(g);
  return bw;
}

}  // namespace ptsort::nn
