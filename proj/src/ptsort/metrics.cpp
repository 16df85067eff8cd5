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

#include "ptsort/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ptsort/error.hpp"

namespace ptsort::metrics {

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes), counts_(static_cast<std::size_t>(std::max(classes, 0) * std::max(classes, 0)), 0) {
  require(classes >= 1, "confusion matrix needs at least one class");
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

void ConfusionMatrix::accumulate(std::span<const int> predictions,
                                 std::span<const int> labels) {
  require(predictions.size() == labels.size(),
          "confusion: prediction and label counts differ");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < classes_ && predictions[i] >= 0 &&
                predictions[i] < classes_,
            "confusion: class id out of range at position " + std::to_string(i));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++counts_[static_cast<std::size_t>(labels[i] * classes_ + predictions[i])];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  require(other.classes_ == classes_, "confusion: class count mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

MetricsReport compute_metrics(const ConfusionMatrix& m, std::vector<std::string> class_names) {
  const int c = m.classes();
  const std::uint64_t total = m.total();
  require(total > 0, "compute_metrics: confusion matrix is empty");
  if (class_names.empty()) {
    for (int i = 0; i < c; ++i) class_names.push_back("class" + std::to_string(i));
  }
  require(class_names.size() == static_cast<std::size_t>(c), "class name count mismatch");

  MetricsReport r;
  r.class_names = std::move(class_names);
  r.points = total;
  std::uint64_t trace = 0;
  double acc_sum = 0.0;
  int present = 0;
  for (int k = 0; k < c; ++k) {
    std::uint64_t tp = m.at(k, k), fp = 0, fn = 0;
    for (int j = 0; j < c; ++j) {
      if (j == k) continue;
      fp += m.at(j, k);
      fn += m.at(k, j);
    }
    trace += tp;
    const std::uint64_t union_count = tp + fp + fn;
    r.iou_degenerate.push_back(union_count == 0);
    r.iou.push_back(union_count == 0 ? 0.0
                                     : static_cast<double>(tp) / static_cast<double>(union_count));
    const bool in_truth = tp + fn > 0;
    r.truth_present.push_back(in_truth);
    r.accuracy.push_back(in_truth ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0);
    if (in_truth) {
      acc_sum += r.accuracy.back();
      ++present;
    }
  }
  double iou_sum = 0.0;
  for (double v : r.iou) iou_sum += v;
  r.miou = iou_sum / static_cast<double>(c);
  r.macc = present > 0 ? acc_sum / static_cast<double>(present) : 0.0;
  r.oa = static_cast<double>(trace) / static_cast<double>(total);
  return r;
}

double neighbor_retention(const curves::Permutation& perm,
                          const geometry::NeighborTable& neighbors, std::size_t window_size) {
  require(window_size >= 1, "retention: window size must be positive");
  curves::require_valid(perm, neighbors.size());
  const auto pos = perm.inverse();
  std::size_t kept = 0, pairs = 0;
  for (std::size_t i = 0; i < neighbors.size(); ++i) {
    for (std::size_t j : neighbors.row(i)) {
      ++pairs;
      if (pos[i] / window_size == pos[j] / window_size) ++kept;
    }
  }
  require(pairs > 0, "retention: neighbor table is empty");
  return static_cast<double>(kept) / static_cast<double>(pairs);
}

double window_extent(const curves::Permutation& perm, const geometry::PointCloud& cloud,
                     std::size_t window_size) {
  require(window_size >= 1, "window extent: window size must be positive");
  curves::require_valid(perm, cloud.size());
  double sum = 0.0;
  std::size_t windows = 0;
  for (std::size_t s = 0; s < perm.size(); s += window_size) {
    const std::size_t e = std::min(perm.size(), s + window_size);
    geometry::Vec3 centroid{0.0, 0.0, 0.0};
    for (std::size_t p = s; p < e; ++p) {
      for (int a = 0; a < 3; ++a) centroid[a] += cloud.positions[perm.order[p]][a];
    }
    const double inv = 1.0 / static_cast<double>(e - s);
    for (auto& v : centroid) v *= inv;
    double ss = 0.0;
    for (std::size_t p = s; p < e; ++p) {
      for (int a = 0; a < 3; ++a) {
        const double d = cloud.positions[perm.order[p]][a] - centroid[a];
        ss += d * d;
      }
    }
    sum += std::sqrt(ss * inv);
    ++windows;
  }
  return sum / static_cast<double>(windows);
}

namespace {

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string align_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c > 0) out << " | ";
      const auto& s = cells[r][c];
      if (c == 0) {
        out << s << std::string(widths[c] - s.size(), ' ');
      } else {
        out << std::string(widths[c] - s.size(), ' ') << s;
      }
    }
    out << '\n';
    if (r == 0) {
      std::size_t line = 0;
      for (std::size_t w : widths) line += w;
      out << std::string(line + 3 * (widths.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

std::vector<std::string> names_of(const std::vector<LabeledReport>& rows) {
  return rows.empty() ? std::vector<std::string>{} : rows.front().second.class_names;
}

std::string join_csv(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ',';
    line += fields[i];
  }
  return line + '\n';
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    classes.push_back({{"name", r.class_names[c]},
                       {"iou", r.iou[c]},
                       {"accuracy", r.accuracy[c]},
                       {"iou_degenerate", static_cast<bool>(r.iou_degenerate[c])},
                       {"present_in_truth", static_cast<bool>(r.truth_present[c])}});
  }
  return {{"mIoU", r.miou}, {"mAcc", r.macc}, {"OA", r.oa}, {"points", r.points},
          {"classes", classes}};
}

nlohmann::json to_json(const LocalityReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j{{"method", row.method}, {"available", row.available}};
    if (row.available) {
      j["neighbor_retention"] = row.retention;
      j["mean_window_extent"] = row.extent;
    } else {
      j["neighbor_retention"] = nullptr;
      j["mean_window_extent"] = nullptr;
    }
    if (!row.note.empty()) j["note"] = row.note;
    rows.push_back(std::move(j));
  }
  return {{"k", r.k}, {"window_size", r.window_size}, {"clouds", r.clouds}, {"rows", rows}};
}

std::string render_iou_csv(const std::vector<LabeledReport>& rows,
                           const std::string& label_header) {
  std::vector<std::string> header{label_header, "mIoU"};
  for (const auto& n : names_of(rows)) header.push_back(n);
  std::string out = join_csv(header);
  for (const auto& [label, r] : rows) {
    std::vector<std::string> f{label, pct(r.miou)};
    for (double v : r.iou) f.push_back(pct(v));
    out += join_csv(f);
  }
  return out;
}

std::string render_acc_csv(const std::vector<LabeledReport>& rows,
                           const std::string& label_header) {
  std::vector<std::string> header{label_header, "mAcc", "OA"};
  for (const auto& n : names_of(rows)) header.push_back(n);
  std::string out = join_csv(header);
  for (const auto& [label, r] : rows) {
    std::vector<std::string> f{label, pct(r.macc), pct(r.oa)};
    for (double v : r.accuracy) f.push_back(pct(v));
    out += join_csv(f);
  }
  return out;
}

std::string render_text(const std::vector<LabeledReport>& rows,
                        const std::string& label_header) {
  std::vector<std::vector<std::string>> iou{{label_header, "mIoU"}};
  std::vector<std::vector<std::string>> acc{{label_header, "mAcc", "OA"}};
  for (const auto& n : names_of(rows)) {
    iou[0].push_back(n);
    acc[0].push_back(n);
  }
  for (const auto& [label, r] : rows) {
    std::vector<std::string> a{label, pct(r.miou)};
    std::vector<std::string> b{label, pct(r.macc), pct(r.oa)};
    for (std::size_t c = 0; c < r.iou.size(); ++c) {
      a.push_back(pct(r.iou[c]) + (r.iou_degenerate[c] ? "*" : ""));
      b.push_back(r.truth_present[c] ? pct(r.accuracy[c]) : "-");
    }
    iou.push_back(std::move(a));
    acc.push_back(std::move(b));
  }
  return "IoU (%)\n" + align_table(iou) + "\nAccuracy (%)\n" + align_table(acc);
}

std::string render_text(const LocalityReport& r) {
  std::vector<std::vector<std::string>> cells{
      {"Ordering", "Retention (k=" + std::to_string(r.k) + ", w=" +
                       std::to_string(r.window_size) + ")",
       "Mean window extent (m)"}};
  for (const auto& row : r.rows) {
    if (row.available) {
      cells.push_back({row.method, fixed(row.retention, 4), fixed(row.extent, 4)});
    } else {
      cells.push_back({row.method, "n/a", "n/a"});
    }
  }
  std::string text = align_table(cells);
  for (const auto& row : r.rows) {
    if (!row.note.empty()) text += row.method + ": " + row.note + '\n';
  }
  return text;
}

std::string render_csv(const LocalityReport& r) {
  std::string out = "Ordering,NeighborRetention,MeanWindowExtent\n";
  for (const auto& row : r.rows) {
    out += row.method + ',' +
           (row.available ? fixed(row.retention, 6) + ',' + fixed(row.extent, 6) : "n/a,n/a") +
           '\n';
  }
  return out;
}

}  // namespace ptsort::metrics
