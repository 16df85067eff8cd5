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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptsort/backbone.hpp"
#include "ptsort/curves.hpp"
#include "ptsort/geometry.hpp"
#include "ptsort/metrics.hpp"
#include "ptsort/nn/optim.hpp"
#include "ptsort/sorter.hpp"

namespace ptsort::train {

inline constexpr const char* kLearned = "learned";

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t warmup_epochs = 5;
  double lambda = 1.0;
  double seg_weight = 1.0;
  // "learned" or a static curve variant name used for every epoch.
  std::string serialization = kLearned;
  std::vector<std::string> warmup_variants{"z", "z-rev", "hilbert", "hilbert-rev"};
  int bits_per_axis = curves::kDefaultBitsPerAxis;
  sorter::SorterConfig sorter;
  backbone::BackboneConfig backbone;
  nn::AdamConfig adam;
  nn::OneCycleConfig schedule;
  double sorter_max_lr = 0.006;
  bool shuffle_scenes = true;
  // Neighbor count used for retention bookkeeping (not for the loss).
  std::size_t metric_k = 8;
  bool log_wall_time = false;
  std::uint64_t seed = 0;

  void validate() const;
  bool learned() const { return serialization == kLearned; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string serialization;
  double seg_loss = 0.0;
  double local_loss = 0.0;
  double local_loss_per_neighbor = 0.0;
  double dist_loss = 0.0;
  double ord_loss = 0.0;
  double total_loss = 0.0;
  double lr = 0.0;
  double sorter_lr = 0.0;
  double score_std = 0.0;
  double retention = 0.0;
  double train_oa = 0.0;
  double wall_time = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::optional<nlohmann::json> final_eval;

  std::string to_jsonl() const;
};

nlohmann::json to_json(const EpochRecord& record);

struct SorterResult {
  nn::MlpParams sorter;
  TrainHistory history;
};

/// Optimizes the ordering loss alone, one AdamW step per cloud per epoch.
SorterResult train_sorter(const std::vector<geometry::PointCloud>& clouds,
                          const TrainConfig& config);

struct TrainedModel {
  backbone::ModelParams backbone;
  nn::MlpParams sorter;
  std::string serialization = kLearned;
  int bits_per_axis = curves::kDefaultBitsPerAxis;
  std::size_t feature_count = 0;
  std::vector<std::string> class_names;
};

struct Evaluation {
  metrics::MetricsReport metrics;
  metrics::LocalityReport locality;
};

using CheckpointHook = std::function<void(std::size_t epoch, const TrainedModel&)>;

struct JointResult {
  TrainedModel model;
  TrainHistory history;
  Evaluation final_train_eval;
};

/// Warmup epochs (< warmup_epochs) serialize with static curves while the
/// sorter learns from the ordering loss; later epochs use the sorter's
/// eval-mode argsort. The backbone only sees the segmentation loss, the
/// sorter only lambda times the ordering loss.
JointResult train_joint(const std::vector<geometry::PointCloud>& clouds,
                        const TrainConfig& config, const CheckpointHook& hook = {},
                        std::size_t checkpoint_every = 0);

/// Serialization the model would use for `cloud` (or `order_override`).
curves::Permutation serialize(const TrainedModel& model, const geometry::PointCloud& cloud,
                              const std::string& order_override = "");

/// Eval-mode pass over labeled clouds; confusion is pooled across clouds,
/// locality statistics are averaged per cloud.
Evaluation evaluate(const TrainedModel& model, const std::vector<geometry::PointCloud>& clouds,
                    std::size_t metric_k = 8, const std::string& order_override = "");

/// One locality row per method name ("learned" or a curve variant). A
/// missing sorter turns the learned row into an unavailable row.
metrics::LocalityReport compare_orders(const std::vector<geometry::PointCloud>& clouds,
                                       const nn::MlpParams* sorter,
                                       const std::vector<std::string>& methods,
                                       std::size_t k, std::size_t window_size,
                                       int bits_per_axis = curves::kDefaultBitsPerAxis);

struct AblationRow {
  std::size_t k = 0;
  bool ok = false;
  std::string error;
  metrics::MetricsReport metrics;
  double retention = 0.0;
  double local_loss = 0.0;
  double local_loss_per_neighbor = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  nlohmann::json to_json() const;
  std::string to_text() const;
  std::string iou_csv() const;
  std::string acc_csv() const;
};

/// train_joint + evaluate once per k with identical seeds. A failing run is
/// recorded in its row and the sweep continues.
AblationTable ablation_sweep(const TrainConfig& base,
                             const std::vector<geometry::PointCloud>& train_clouds,
                             const std::vector<geometry::PointCloud>& eval_clouds,
                             const std::vector<std::size_t>& k_values);

}  // namespace ptsort::train
