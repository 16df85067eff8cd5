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
#include <utility>
#include <vector>

#include "ptsort/curves.hpp"
#include "ptsort/geometry.hpp"
#include "ptsort/nn/losses.hpp"
#include "ptsort/nn/mlp.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::backbone {

/// Contiguous [start, end) chunks covering [0, n) in order; all of size
/// window_size except possibly the last.
struct WindowPartition {
  std::size_t window_size = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
};

WindowPartition partition_windows(std::size_t n, std::size_t window_size);

/// Number of (query, key) pairs scored by windowed attention: sum of len^2.
std::size_t attention_pair_count(const WindowPartition& partition);

/// Multi-head self-attention restricted to windows, with output projection
/// and residual: y = x + concat_h(softmax(q_h k_h^T / sqrt(d_h)) v_h) Wo + bo.
/// Keys carry no bias; it would shift every logit in a row equally.
struct AttentionParams {
  std::size_t width = 0;
  std::size_t heads = 1;
  nn::Matrix query, key, value, output;
  std::vector<double> query_bias, value_bias, output_bias;

  nn::TensorList trainable(const std::string& prefix);
};

AttentionParams make_attention(std::size_t width, std::size_t heads, Rng& rng);

struct AttentionCache {
  WindowPartition partition;
  nn::Matrix inputs, q, k, v, mixed;
  // Per window: heads x len x len softmax weights.
  std::vector<std::vector<double>> probs;
};

struct AttentionForward {
  nn::Matrix outputs;
  AttentionCache cache;
};

AttentionForward window_attention_forward(const AttentionParams& params,
                                          const nn::Matrix& features,
                                          const WindowPartition& partition);

struct AttentionBackward {
  AttentionParams grads;
  nn::Matrix grad_features;
};

AttentionBackward window_attention_backward(const AttentionParams& params,
                                            const AttentionCache& cache,
                                            const nn::Matrix& grad_outputs);

/// y = x + GELU(x W1 + b1) W2 + b2.
struct FeedForward {
  nn::Linear up, down;
};

struct Block {
  AttentionParams attention;
  FeedForward ffn;
};

struct BackboneConfig {
  std::size_t width = 32;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::size_t window_size = 16;
  std::size_t ffn_multiplier = 2;

  void validate() const;
};

struct ModelParams {
  nn::MlpParams embed;
  std::vector<Block> blocks;
  nn::MlpParams head;
  int class_count = 0;
  std::size_t window_size = 16;

  nn::TensorList trainable(const std::string& prefix = "backbone");
  nn::TensorList buffers(const std::string& prefix = "backbone");
};

ModelParams make_model(std::size_t feature_count, int class_count,
                       const BackboneConfig& config, Rng& rng);
ModelParams zeros_like(const ModelParams& model);

/// Zeroes every attention and feed-forward output projection so each block
/// reduces to its residual path.
void zero_residual_branches(ModelParams& model);

struct FeedForwardCache {
  nn::Matrix inputs, pre_activation, hidden;
};

struct SegmentationCache {
  curves::Permutation perm;
  nn::MlpCache embed;
  std::vector<AttentionCache> attention;
  std::vector<FeedForwardCache> ffn;
  nn::MlpCache head;
};

struct SegmentationForward {
  nn::Matrix logits;  // row i describes input point i
  SegmentationCache cache;
};

/// Embeds every point, gathers rows into serialized order, runs the blocks
/// over contiguous windows, classifies and scatters logits back to input
/// order.
SegmentationForward segmentation_forward(ModelParams& model,
                                         const geometry::PointCloud& cloud,
                                         const curves::Permutation& perm, nn::Mode mode,
                                         bool update_running_stats = true);

/// Same pipeline starting from precomputed embedding input rows.
SegmentationForward segmentation_forward(ModelParams& model, const nn::Matrix& inputs,
                                         const curves::Permutation& perm, nn::Mode mode,
                                         bool update_running_stats = true);

struct SegmentationBackward {
  ModelParams grads;
  nn::Matrix grad_inputs;  // w.r.t. the embedding input rows, input order
};

SegmentationBackward segmentation_backward(const ModelParams& model,
                                           const SegmentationCache& cache,
                                           const nn::Matrix& grad_logits);

nn::LossAndGrad segmentation_loss(const nn::Matrix& logits, std::span<const int> labels);

std::vector<int> argmax_rows(const nn::Matrix& logits);

}  // namespace ptsort::backbone
