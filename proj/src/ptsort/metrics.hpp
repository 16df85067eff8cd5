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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptsort/curves.hpp"
#include "ptsort/geometry.hpp"

namespace ptsort::metrics {

/// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);

  int classes() const { return classes_; }
  std::uint64_t at(int truth, int predicted) const {
    return counts_[static_cast<std::size_t>(truth * classes_ + predicted)];
  }
  std::uint64_t total() const;

  void accumulate(std::span<const int> predictions, std::span<const int> labels);
  void merge(const ConfusionMatrix& other);

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_;
  std::vector<std::uint64_t> counts_;
};

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<double> iou;
  std::vector<double> accuracy;
  // Class absent from both truth and prediction: IoU reported as 0.
  std::vector<bool> iou_degenerate;
  std::vector<bool> truth_present;
  double miou = 0.0;
  double macc = 0.0;
  double oa = 0.0;
  std::uint64_t points = 0;
};

/// IoU_c = TP/(TP+FP+FN), averaged over all classes; accuracy_c =
/// TP/(TP+FN), averaged over classes present in the ground truth;
/// OA = trace / total.
MetricsReport compute_metrics(const ConfusionMatrix& matrix,
                              std::vector<std::string> class_names = {});

/// Fraction of (i, j in N_k(i)) pairs whose serialized positions share a
/// contiguous window of `window_size`.
double neighbor_retention(const curves::Permutation& perm,
                          const geometry::NeighborTable& neighbors, std::size_t window_size);

/// Mean over windows of the RMS distance of members to the window centroid.
double window_extent(const curves::Permutation& perm, const geometry::PointCloud& cloud,
                     std::size_t window_size);

struct LocalityRow {
  std::string method;
  bool available = true;
  double retention = 0.0;
  double extent = 0.0;
  std::string note;
};

struct LocalityReport {
  std::size_t k = 8;
  std::size_t window_size = 16;
  std::size_t clouds = 0;
  std::vector<LocalityRow> rows;
};

// Renderers. Table columns follow the usual segmentation benchmark layout:
// mIoU then per-class IoU; mAcc, OA then per-class accuracy. Percentages
// with two decimals in the text and CSV forms, raw fractions in JSON.
using LabeledReport = std::pair<std::string, MetricsReport>;

nlohmann::json to_json(const MetricsReport& report);
nlohmann::json to_json(const LocalityReport& report);
std::string render_iou_csv(const std::vector<LabeledReport>& rows,
                           const std::string& label_header = "Method");
std::string render_acc_csv(const std::vector<LabeledReport>& rows,
                           const std::string& label_header = "Method");
std::string render_text(const std::vector<LabeledReport>& rows,
                        const std::string& label_header = "Method");
std::string render_text(const LocalityReport& report);
std::string render_csv(const LocalityReport& report);

}  // namespace ptsort::metrics
