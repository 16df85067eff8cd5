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

#include "ptsort/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "ptsort/error.hpp"
#include "ptsort/sorter.hpp"

namespace ptsort::backbone {

namespace {

nn::Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

std::vector<double> uniform_vector(std::size_t n, double bound, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return v;
}

nn::Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  nn::Linear l{uniform_matrix(in, out, bound, rng), {}};
  l.bias = uniform_vector(out, bound, rng);
  return l;
}

nn::Matrix project(const nn::Matrix& x, const nn::Matrix& w, const std::vector<double>& b) {
  nn::Matrix y = nn::matmul(x, w);
  if (!b.empty()) nn::add_row_vector(y, b);
  return y;
}

void zero(nn::Matrix& m) { std::fill(m.values().begin(), m.values().end(), 0.0); }
void zero(std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); }

AttentionParams zeros_like(const AttentionParams& p) {
  AttentionParams z = p;
  for (auto* m : {&z.query, &z.key, &z.value, &z.output}) zero(*m);
  for (auto* v : {&z.query_bias, &z.value_bias, &z.output_bias}) zero(*v);
  return z;
}

FeedForwardCache ffn_forward(const FeedForward& f, const nn::Matrix& x, nn::Matrix& y) {
  FeedForwardCache c{x, project(x, f.up.weight, f.up.bias), {}};
  c.hidden = c.pre_activation;
  for (double& v : c.hidden.values()) v = nn::gelu(v);
  y = project(c.hidden, f.down.weight, f.down.bias);
  nn::add_in_place(y, x);
  return c;
}

nn::Matrix ffn_backward(const FeedForward& f, const FeedForwardCache& c,
                        const nn::Matrix& grad_out, FeedForward& grads) {
  grads.down.weight = nn::matmul_at_b(c.hidden, grad_out);
  nn::add_column_sums(grad_out, grads.down.bias);
  nn::Matrix dh = nn::matmul_a_bt(grad_out, f.down.weight);
  auto dv = dh.values();
  auto pv = c.pre_activation.values();
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= nn::gelu_derivative(pv[i]);
  grads.up.weight = nn::matmul_at_b(c.inputs, dh);
  nn::add_column_sums(dh, grads.up.bias);
  nn::Matrix dx = nn::matmul_a_bt(dh, f.up.weight);
  nn::add_in_place(dx, grad_out);
  return dx;
}

// Logits come back in serialized order; route row p to point perm[p].
nn::Matrix scatter_rows(const nn::Matrix& serialized, const curves::Permutation& perm) {
  nn::Matrix out(serialized.rows(), serialized.cols());
  for (std::size_t p = 0; p < perm.size(); ++p) {
    auto src = serialized.row(p);
    std::copy(src.begin(), src.end(), out.row(perm.order[p]).begin());
  }
  return out;
}

}  // namespace

WindowPartition partition_windows(std::size_t n, std::size_t window_size) {
  require(n >= 1, "partition_windows: n must be positive");
  require(window_size >= 1, "partition_windows: window size must be positive");
  WindowPartition p{window_size, {}};
  for (std::size_t start = 0; start < n; start += window_size) {
    p.ranges.emplace_back(start, std::min(n, start + window_size));
  }
  return p;
}

std::size_t attention_pair_count(const WindowPartition& partition) {
  std::size_t pairs = 0;
  for (const auto& [s, e] : partition.ranges) pairs += (e - s) * (e - s);
  return pairs;
}

nn::TensorList AttentionParams::trainable(const std::string& prefix) {
  return {
      {prefix + ".query", {width, width}, query.values()},
      {prefix + ".query_bias", {width}, query_bias},
      {prefix + ".key", {width, width}, key.values()},
      {prefix + ".value", {width, width}, value.values()},
      {prefix + ".value_bias", {width}, value_bias},
      {prefix + ".output", {width, width}, output.values()},
      {prefix + ".output_bias", {width}, output_bias},
  };
}

AttentionParams make_attention(std::size_t width, std::size_t heads, Rng& rng) {
  require(heads >= 1 && width % heads == 0, "attention width must be divisible by heads");
  const double bound = 1.0 / std::sqrt(static_cast<double>(width));
  AttentionParams p;
  p.width = width;
  p.heads = heads;
  p.query = uniform_matrix(width, width, bound, rng);
  p.key = uniform_matrix(width, width, bound, rng);
  p.value = uniform_matrix(width, width, bound, rng);
  p.output = uniform_matrix(width, width, bound, rng);
  p.query_bias = uniform_vector(width, bound, rng);
  p.value_bias = uniform_vector(width, bound, rng);
  p.output_bias = uniform_vector(width, bound, rng);
  return p;
}

AttentionForward window_attention_forward(const AttentionParams& params,
                                          const nn::Matrix& features,
                                          const WindowPartition& partition) {
  const std::size_t d = params.width;
  require(params.heads >= 1 && d % params.heads == 0,
          "attention width must be divisible by heads");
  require(features.cols() == d, "attention input width mismatch");
  require(!partition.ranges.empty() && partition.ranges.back().second == features.rows(),
          "window partition does not cover the feature rows");

  AttentionForward fw;
  AttentionCache& c = fw.cache;
  c.partition = partition;
  c.inputs = features;
  c.q = project(features, params.query, params.query_bias);
  c.k = nn::matmul(features, params.key);
  c.v = project(features, params.value, params.value_bias);
  c.mixed = nn::Matrix(features.rows(), d);

  const std::size_t dh = d / params.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& [s, e] : partition.ranges) {
    const std::size_t len = e - s;
    std::vector<double> probs(params.heads * len * len);
    for (std::size_t h = 0; h < params.heads; ++h) {
      const std::size_t off = h * dh;
      double* P = probs.data() + h * len * len;
      for (std::size_t a = 0; a < len; ++a) {
        const double* qa = c.q.row(s + a).data() + off;
        double peak = -INFINITY;
        for (std::size_t b = 0; b < len; ++b) {
          const double* kb = c.k.row(s + b).data() + off;
          double dot = 0.0;
          for (std::size_t t = 0; t < dh; ++t) dot += qa[t] * kb[t];
          P[a * len + b] = dot * scale;
          peak = std::max(peak, P[a * len + b]);
        }
        double denom = 0.0;
        for (std::size_t b = 0; b < len; ++b) {
          P[a * len + b] = std::exp(P[a * len + b] - peak);
          denom += P[a * len + b];
        }
        double* out = c.mixed.row(s + a).data() + off;
        for (std::size_t b = 0; b < len; ++b) {
          P[a * len + b] /= denom;
          const double* vb = c.v.row(s + b).data() + off;
          const double w = P[a * len + b];
          for (std::size_t t = 0; t < dh; ++t) out[t] += w * vb[t];
        }
      }
    }
    c.probs.push_back(std::move(probs));
  }
  fw.outputs = project(c.mixed, params.output, params.output_bias);
  nn::add_in_place(fw.outputs, features);
  return fw;
}

AttentionBackward window_attention_backward(const AttentionParams& params,
                                            const AttentionCache& cache,
                                            const nn::Matrix& grad_outputs) {
  const std::size_t d = params.width;
  const std::size_t n = cache.inputs.rows();
  require(cache.inputs.cols() == d && cache.probs.size() == cache.partition.ranges.size(),
          "attention cache does not match parameters");
  require(grad_outputs.rows() == n && grad_outputs.cols() == d,
          "attention upstream gradient has the wrong shape");

  AttentionBackward bw{zeros_like(params), grad_outputs};
  AttentionParams& g = bw.grads;
  g.output = nn::matmul_at_b(cache.mixed, grad_outputs);
  nn::add_column_sums(grad_outputs, g.output_bias);
  const nn::Matrix d_mixed = nn::matmul_a_bt(grad_outputs, params.output);

  nn::Matrix dq(n, d), dk(n, d), dv(n, d);
  const std::size_t dh = d / params.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> dP;
  for (std::size_t w = 0; w < cache.partition.ranges.size(); ++w) {
    const auto [s, e] = cache.partition.ranges[w];
    const std::size_t len = e - s;
    dP.assign(len * len, 0.0);
    for (std::size_t h = 0; h < params.heads; ++h) {
      const std::size_t off = h * dh;
      const double* P = cache.probs[w].data() + h * len * len;
      for (std::size_t a = 0; a < len; ++a) {
        const double* doa = d_mixed.row(s + a).data() + off;
        double row_dot = 0.0;
        for (std::size_t b = 0; b < len; ++b) {
          const double* vb = cache.v.row(s + b).data() + off;
          double* dvb = dv.row(s + b).data() + off;
          const double pab = P[a * len + b];
          double acc = 0.0;
          for (std::size_t t = 0; t < dh; ++t) {
            acc += doa[t] * vb[t];
            dvb[t] += pab * doa[t];
          }
          dP[a * len + b] = acc;
          row_dot += pab * acc;
        }
        const double* qa = cache.q.row(s + a).data() + off;
        double* dqa = dq.row(s + a).data() + off;
        for (std::size_t b = 0; b < len; ++b) {
          const double ds = P[a * len + b] * (dP[a * len + b] - row_dot) * scale;
          const double* kb = cache.k.row(s + b).data() + off;
          double* dkb = dk.row(s + b).data() + off;
          for (std::size_t t = 0; t < dh; ++t) {
            dqa[t] += ds * kb[t];
            dkb[t] += ds * qa[t];
          }
        }
      }
    }
  }

  g.query = nn::matmul_at_b(cache.inputs, dq);
  nn::add_column_sums(dq, g.query_bias);
  g.key = nn::matmul_at_b(cache.inputs, dk);
  g.value = nn::matmul_at_b(cache.inputs, dv);
  nn::add_column_sums(dv, g.value_bias);
  nn::add_in_place(bw.grad_features, nn::matmul_a_bt(dq, params.query));
  nn::add_in_place(bw.grad_features, nn::matmul_a_bt(dk, params.key));
  nn::add_in_place(bw.grad_features, nn::matmul_a_bt(dv, params.value));
  return bw;
}

void BackboneConfig::validate() const {
  require(width >= 1 && heads >= 1 && width % heads == 0,
          "backbone.width must be a positive multiple of backbone.heads");
  require(window_size >= 1, "backbone.window must be at least 1");
  require(ffn_multiplier >= 1, "backbone.ffn_multiplier must be at least 1");
}

nn::TensorList ModelParams::trainable(const std::string& prefix) {
  nn::TensorList out = embed.trainable(prefix + ".embed");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string base = prefix + ".block" + std::to_string(b);
    for (auto& t : blocks[b].attention.trainable(base + ".attn")) out.push_back(t);
    auto& f = blocks[b].ffn;
    const std::size_t d = f.up.weight.rows(), hidden = f.up.weight.cols();
    out.push_back({base + ".ffn.up.weight", {d, hidden}, f.up.weight.values()});
    out.push_back({base + ".ffn.up.bias", {hidden}, f.up.bias});
    out.push_back({base + ".ffn.down.weight", {hidden, d}, f.down.weight.values()});
    out.push_back({base + ".ffn.down.bias", {d}, f.down.bias});
  }
  for (auto& t : head.trainable(prefix + ".head")) out.push_back(t);
  return out;
}

nn::TensorList ModelParams::buffers(const std::string& prefix) {
  nn::TensorList out = embed.buffers(prefix + ".embed");
  for (auto& t : head.buffers(prefix + ".head")) out.push_back(t);
  return out;
}

ModelParams make_model(std::size_t feature_count, int class_count,
                       const BackboneConfig& config, Rng& rng) {
  config.validate();
  require(class_count >= 1, "class count must be positive");
  ModelParams m;
  m.class_count = class_count;
  m.window_size = config.window_size;
  const std::size_t d = config.width;
  m.embed = nn::make_mlp({3 + feature_count, d, d}, true, rng);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    Block block;
    block.attention = make_attention(d, config.heads, rng);
    block.ffn.up = make_linear(d, config.ffn_multiplier * d, rng);
    block.ffn.down = make_linear(config.ffn_multiplier * d, d, rng);
    m.blocks.push_back(std::move(block));
  }
  m.head = nn::make_mlp({d, static_cast<std::size_t>(class_count)}, false, rng);
  return m;
}

ModelParams zeros_like(const ModelParams& model) {
  ModelParams z = model;
  z.embed = nn::zeros_like(model.embed);
  z.head = nn::zeros_like(model.head);
  for (auto& b : z.blocks) {
    b.attention = zeros_like(b.attention);
    for (auto* l : {&b.ffn.up, &b.ffn.down}) {
      zero(l->weight);
      zero(l->bias);
    }
  }
  return z;
}

void zero_residual_branches(ModelParams& model) {
  for (auto& b : model.blocks) {
    zero(b.attention.output);
    zero(b.attention.output_bias);
    zero(b.ffn.down.weight);
    zero(b.ffn.down.bias);
  }
}

SegmentationForward segmentation_forward(ModelParams& model,
                                         const geometry::PointCloud& cloud,
                                         const curves::Permutation& perm, nn::Mode mode,
                                         bool update_running_stats) {
  require(cloud.class_count == model.class_count || !cloud.has_labels(),
          "cloud class count does not match the model");
  return segmentation_forward(model, sorter::sorter_inputs(cloud), perm, mode,
                              update_running_stats);
}

SegmentationForward segmentation_forward(ModelParams& model, const nn::Matrix& inputs,
                                         const curves::Permutation& perm, nn::Mode mode,
                                         bool update_running_stats) {
  curves::require_valid(perm, inputs.rows());
  SegmentationForward fw;
  SegmentationCache& c = fw.cache;
  c.perm = perm;
  // Embedding is pointwise, so it runs in input order; batch statistics then
  // do not depend on the serialization.
  auto embedded = nn::mlp_forward(model.embed, inputs, mode, update_running_stats);
  c.embed = std::move(embedded.cache);
  nn::Matrix x = nn::gather_rows(embedded.outputs, perm.order);

  const WindowPartition partition = partition_windows(x.rows(), model.window_size);
  for (const Block& block : model.blocks) {
    auto attn = window_attention_forward(block.attention, x, partition);
    c.attention.push_back(std::move(attn.cache));
    nn::Matrix y;
    c.ffn.push_back(ffn_forward(block.ffn, attn.outputs, y));
    x = std::move(y);
  }
  auto head = nn::mlp_forward(model.head, x, mode, update_running_stats);
  c.head = std::move(head.cache);
  fw.logits = scatter_rows(head.outputs, perm);
  if (!nn::all_finite(fw.logits)) {
    throw Error(ErrorCode::kNumeric, "segmentation logits are not finite");
  }
  return fw;
}

SegmentationBackward segmentation_backward(const ModelParams& model,
                                           const SegmentationCache& cache,
                                           const nn::Matrix& grad_logits) {
  require(cache.attention.size() == model.blocks.size() &&
              cache.ffn.size() == model.blocks.size(),
          "segmentation cache does not match the model");
  require(grad_logits.rows() == cache.perm.size() &&
              grad_logits.cols() == static_cast<std::size_t>(model.class_count),
          "logit gradient has the wrong shape");
  SegmentationBackward bw{zeros_like(model), {}};

  const nn::Matrix serialized_grad = nn::gather_rows(grad_logits, cache.perm.order);
  auto head = nn::mlp_backward(model.head, cache.head, serialized_grad);
  bw.grads.head = std::move(head.grads);
  nn::Matrix g = std::move(head.grad_inputs);
  for (std::size_t b = model.blocks.size(); b-- > 0;) {
    g = ffn_backward(model.blocks[b].ffn, cache.ffn[b], g, bw.grads.blocks[b].ffn);
    auto attn = window_attention_backward(model.blocks[b].attention, cache.attention[b], g);
    bw.grads.blocks[b].attention = std::move(attn.grads);
    g = std::move(attn.grad_features);
  }
  auto embed = nn::mlp_backward(model.embed, cache.embed, scatter_rows(g, cache.perm));
  bw.grads.embed = std::move(embed.grads);
  bw.grad_inputs = std::move(embed.grad_inputs);
  return bw;
}

nn::LossAndGrad segmentation_loss(const nn::Matrix& logits, std::span<const int> labels) {
  return nn::softmax_cross_entropy(logits, labels);
}

std::vector<int> argmax_rows(const nn::Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace ptsort::backbone
