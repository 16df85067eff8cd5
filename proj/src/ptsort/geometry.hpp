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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ptsort::geometry {

using Vec3 = std::array<double, 3>;

/// Point set with per-point attributes. Features are stored row-major,
/// `feature_count` values per point; `labels` is empty for unlabeled clouds.
struct PointCloud {
  std::vector<Vec3> positions;
  std::size_t feature_count = 0;
  std::vector<double> features;
  std::vector<int> labels;
  int class_count = 1;
  std::vector<std::string> class_names;

  std::size_t size() const { return positions.size(); }
  bool has_labels() const { return !labels.empty(); }

  std::span<const double> feature_row(std::size_t i) const {
    return {features.data() + i * feature_count, feature_count};
  }

  /// Throws ptsort::Error when any structural invariant is broken.
  void validate() const;
};

/// Row i holds the k nearest points to point i, closest first, ties broken
/// by smaller index. A point never lists itself.
struct NeighborTable {
  std::size_t k = 0;
  std::vector<std::size_t> indices;

  std::size_t size() const { return k == 0 ? 0 : indices.size() / k; }
  std::span<const std::size_t> row(std::size_t i) const {
    return {indices.data() + i * k, k};
  }
};

/// Exact k-NN by exhaustive scan. O(N^2); the reference for `knn`.
NeighborTable knn_brute_force(const PointCloud& cloud, std::size_t k);

/// Exact k-NN using a uniform grid to prune candidates. Identical output to
/// knn_brute_force, including tie-breaking.
NeighborTable knn(const PointCloud& cloud, std::size_t k);

/// Merges points sharing a cell of side `cell_size` (cells anchored at the
/// origin). Positions and features are averaged; the label is the majority
/// label with ties going to the smaller class id. Output is ordered by cell.
PointCloud grid_sample(const PointCloud& cloud, double cell_size);

// Synthetic scene classes, ordered to match the report column layout.
enum SceneClass : int {
  kBackground = 0,
  kBuildingDamaged = 1,
  kBuildingIntact = 2,
  kRoad = 3,
  kTree = 4,
};
inline constexpr int kSceneClassCount = 5;
const std::vector<std::string>& scene_class_names();

struct SceneConfig {
  double extent = 40.0;
  std::size_t ground_planes = 1;
  std::size_t intact_boxes = 2;
  std::size_t collapsed_boxes = 2;
  std::size_t road_strips = 2;
  std::size_t tree_blobs = 3;
  std::size_t points_per_primitive = 200;
  double road_aspect = 20.0;
  double noise_sigma = 0.03;
  double color_noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Labeled 5-class scene built from simple primitives with RGB features.
/// Each primitive contributes exactly `points_per_primitive` points.
PointCloud generate_scene(const SceneConfig& config);

}  // namespace ptsort::geometry
