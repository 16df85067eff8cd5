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

#include "ptsort/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <queue>
#include <tuple>

#include "ptsort/error.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::geometry {

namespace {

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

struct Candidate {
  double d2;
  std::size_t index;
  bool operator<(const Candidate& o) const {
    return std::tie(d2, index) < std::tie(o.d2, o.index);
  }
};

void check_knn_args(const PointCloud& cloud, std::size_t k) {
  cloud.validate();
  require(k >= 1, "knn: k must be at least 1");
  require(k < cloud.size(), "knn: k (" + std::to_string(k) +
                                ") must be smaller than the point count (" +
                                std::to_string(cloud.size()) + ")");
}

// Bounded max-heap keeping the k best (d2, index) pairs.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  void offer(const Candidate& c) {
    if (heap_.size() < k_) {
      heap_.push(c);
    } else if (c < heap_.top()) {
      heap_.pop();
      heap_.push(c);
    }
  }

  bool full() const { return heap_.size() == k_; }
  double worst_d2() const { return heap_.top().d2; }

  void drain_sorted(std::span<std::size_t> out) {
    for (std::size_t slot = heap_.size(); slot > 0; --slot) {
      out[slot - 1] = heap_.top().index;
      heap_.pop();
    }
  }

 private:
  std::size_t k_;
  std::priority_queue<Candidate> heap_;
};

}  // namespace

void PointCloud::validate() const {
  require(!positions.empty(), "point cloud is empty");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (double c : positions[i]) {
      if (!std::isfinite(c)) fail("point " + std::to_string(i) + " has a non-finite coordinate");
    }
  }
  require(features.size() == positions.size() * feature_count,
          "feature rows do not match point count");
  for (double f : features) require(std::isfinite(f), "non-finite feature value");
  require(class_count >= 1, "class count must be positive");
  if (!labels.empty()) {
    require(labels.size() == positions.size(),
            "label count does not match point count");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= class_count) {
        fail("label of point " + std::to_string(i) + " out of range");
      }
    }
  }
  require(class_names.empty() ||
              class_names.size() == static_cast<std::size_t>(class_count),
          "class name count does not match class count");
}

NeighborTable knn_brute_force(const PointCloud& cloud, std::size_t k) {
  check_knn_args(cloud, k);
  const std::size_t n = cloud.size();
  NeighborTable table{k, std::vector<std::size_t>(n * k)};
  std::vector<Candidate> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) {
        candidates.push_back(
            {squared_distance(cloud.positions[i], cloud.positions[j]), j});
      }
    }
    std::partial_sort(candidates.begin(), candidates.begin() + k,
                      candidates.end());
    for (std::size_t s = 0; s < k; ++s) {
      table.indices[i * k + s] = candidates[s].index;
    }
  }
  return table;
}

NeighborTable knn(const PointCloud& cloud, std::size_t k) {
  check_knn_args(cloud, k);
  const std::size_t n = cloud.size();
  if (n <= 64) return knn_brute_force(cloud, k);

  Vec3 lo = cloud.positions[0];
  Vec3 hi = lo;
  for (const auto& p : cloud.positions) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  // Aim for roughly k points per occupied cell, measured on the non-degenerate
  // axes so flat clouds do not get absurdly large cells.
  double volume = 1.0;
  int live_axes = 0;
  double max_extent = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double e = hi[a] - lo[a];
    max_extent = std::max(max_extent, e);
    if (e > 0.0) {
      volume *= e;
      ++live_axes;
    }
  }
  if (live_axes == 0) return knn_brute_force(cloud, k);
  double cell = std::pow(volume * static_cast<double>(k) / static_cast<double>(n),
                         1.0 / live_axes);
  cell = std::max(cell, max_extent * 1e-6);

  std::array<std::int64_t, 3> dims{};
  auto recompute_dims = [&] {
    std::int64_t total = 1;
    for (int a = 0; a < 3; ++a) {
      dims[a] = static_cast<std::int64_t>(std::floor((hi[a] - lo[a]) / cell)) + 1;
      total *= dims[a];
    }
    return total;
  };
  while (recompute_dims() > static_cast<std::int64_t>(4 * n)) cell *= 1.25;

  auto cell_of = [&](const Vec3& p) {
    std::array<std::int64_t, 3> c{};
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp<std::int64_t>(
          static_cast<std::int64_t>(std::floor((p[a] - lo[a]) / cell)), 0,
          dims[a] - 1);
    }
    return c;
  };
  auto linear = [&](const std::array<std::int64_t, 3>& c) {
    return static_cast<std::size_t>((c[2] * dims[1] + c[1]) * dims[0] + c[0]);
  };

  const std::size_t cell_count =
      static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  std::vector<std::size_t> start(cell_count + 1, 0);
  std::vector<std::array<std::int64_t, 3>> coords(n);
  for (std::size_t i = 0; i < n; ++i) {
    coords[i] = cell_of(cloud.positions[i]);
    ++start[linear(coords[i]) + 1];
  }
  for (std::size_t c = 0; c < cell_count; ++c) start[c + 1] += start[c];
  std::vector<std::size_t> members(n);
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) members[fill[linear(coords[i])]++] = i;
  }

  const std::int64_t max_radius = std::max({dims[0], dims[1], dims[2]});
  const double slack = 1e-9 * cell;
  NeighborTable table{k, std::vector<std::size_t>(n * k)};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& p = cloud.positions[i];
    const auto& home = coords[i];
    TopK best(k);
    for (std::int64_t r = 0; r <= max_radius; ++r) {
      for (std::int64_t dz = -r; dz <= r; ++dz) {
        const std::int64_t cz = home[2] + dz;
        if (cz < 0 || cz >= dims[2]) continue;
        for (std::int64_t dy = -r; dy <= r; ++dy) {
          const std::int64_t cy = home[1] + dy;
          if (cy < 0 || cy >= dims[1]) continue;
          const bool on_face = std::abs(dz) == r || std::abs(dy) == r;
          const std::int64_t step = on_face ? 1 : std::max<std::int64_t>(2 * r, 1);
          for (std::int64_t dx = -r; dx <= r; dx += step) {
            const std::int64_t cx = home[0] + dx;
            if (cx < 0 || cx >= dims[0]) continue;
            const std::size_t c = linear({cx, cy, cz});
            for (std::size_t m = start[c]; m < start[c + 1]; ++m) {
              const std::size_t j = members[m];
              if (j != i) best.offer({squared_distance(p, cloud.positions[j]), j});
            }
          }
        }
      }
      // Anything outside the (2r+1)^3 block lies at least r*cell away.
      const double reach = static_cast<double>(r) * cell - slack;
      if (best.full() && reach > 0.0 && best.worst_d2() < reach * reach) break;
    }
    best.drain_sorted({table.indices.data() + i * k, k});
  }
  return table;
}

PointCloud grid_sample(const PointCloud& cloud, double cell_size) {
  require(cell_size > 0.0 && std::isfinite(cell_size),
          "grid_sample: cell size must be positive");
  cloud.validate();
  using Key = std::array<std::int64_t, 3>;
  std::map<Key, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Key key{};
    for (int a = 0; a < 3; ++a) {
      key[a] = static_cast<std::int64_t>(
          std::floor(cloud.positions[i][a] / cell_size));
    }
    cells[key].push_back(i);
  }

  PointCloud out;
  out.feature_count = cloud.feature_count;
  out.class_count = cloud.class_count;
  out.class_names = cloud.class_names;
  out.positions.reserve(cells.size());
  out.features.reserve(cells.size() * cloud.feature_count);
  std::vector<std::size_t> votes(static_cast<std::size_t>(cloud.class_count));
  for (const auto& [key, idx] : cells) {
    const double inv = 1.0 / static_cast<double>(idx.size());
    Vec3 mean{0.0, 0.0, 0.0};
    for (std::size_t i : idx) {
      for (int a = 0; a < 3; ++a) mean[a] += cloud.positions[i][a];
    }
    for (auto& m : mean) m *= inv;
    out.positions.push_back(mean);
    for (std::size_t f = 0; f < cloud.feature_count; ++f) {
      double sum = 0.0;
      for (std::size_t i : idx) sum += cloud.features[i * cloud.feature_count + f];
      out.features.push_back(sum * inv);
    }
    if (cloud.has_labels()) {
      std::fill(votes.begin(), votes.end(), 0);
      for (std::size_t i : idx) ++votes[static_cast<std::size_t>(cloud.labels[i])];
      // max_element returns the first maximum, i.e. the smallest class id.
      out.labels.push_back(static_cast<int>(
          std::max_element(votes.begin(), votes.end()) - votes.begin()));
    }
  }
  return out;
}

const std::vector<std::string>& scene_class_names() {
  static const std::vector<std::string> names{
      "Background", "Bldg-Dmg", "Bldg-No-Dmg", "Road", "Tree"};
  return names;
}

void SceneConfig::validate() const {
  require(extent > 0.0 && std::isfinite(extent), "scene extent must be positive");
  require(noise_sigma >= 0.0, "scene noise sigma must be nonnegative");
  require(color_noise >= 0.0, "scene color noise must be nonnegative");
  require(road_aspect >= 10.0, "road aspect ratio must be at least 10");
  const std::size_t primitives =
      ground_planes + intact_boxes + collapsed_boxes + road_strips + tree_blobs;
  require(primitives * points_per_primitive > 0,
          "scene would contain zero points");
}

namespace {

class SceneBuilder {
 public:
  SceneBuilder(const SceneConfig& config, PointCloud& cloud)
      : config_(config), cloud_(cloud), rng_(config.seed) {}

  void ground_plane() {
    const double h = config_.extent / 2.0;
    for (std::size_t i = 0; i < config_.points_per_primitive; ++i) {
      emit({rng_.uniform(-h, h), rng_.uniform(-h, h), 0.0},
           {0.55, 0.50, 0.38}, kBackground);
    }
  }

  void intact_box() {
    const auto frame = footprint(4.0, 8.0);
    const double height = rng_.uniform(3.0, 6.0);
    const double hx = frame.half_x, hy = frame.half_y;
    const double roof = 4.0 * hx * hy;
    const double walls = 4.0 * (hx + hy) * height;
    for (std::size_t i = 0; i < config_.points_per_primitive; ++i) {
      double u, v, z;
      if (rng_.uniform() * (roof + walls) < roof) {
        u = rng_.uniform(-hx, hx);
        v = rng_.uniform(-hy, hy);
        z = height;
      } else {
        z = rng_.uniform(0.0, height);
        const double t = rng_.uniform(0.0, 4.0 * (hx + hy));
        if (t < 2.0 * hx) {
          u = -hx + t, v = -hy;
        } else if (t < 2.0 * hx + 2.0 * hy) {
          u = hx, v = -hy + (t - 2.0 * hx);
        } else if (t < 4.0 * hx + 2.0 * hy) {
          u = hx - (t - 2.0 * hx - 2.0 * hy), v = hy;
        } else {
          u = -hx, v = hy - (t - 4.0 * hx - 2.0 * hy);
        }
      }
      emit(frame.place(u, v, z), {0.78, 0.80, 0.84}, kBuildingIntact);
    }
  }

  void collapsed_box() {
    const auto frame = footprint(4.0, 8.0);
    const double height = rng_.uniform(1.5, 3.0);
    const double tilt_u = rng_.uniform(-0.3, 0.3);
    const double tilt_v = rng_.uniform(-0.3, 0.3);
    for (std::size_t i = 0; i < config_.points_per_primitive; ++i) {
      const double u = rng_.uniform(-frame.half_x, frame.half_x);
      const double v = rng_.uniform(-frame.half_y, frame.half_y);
      const double r = std::max(std::abs(u) / frame.half_x, std::abs(v) / frame.half_y);
      // A slumped heap: tilted, tapering to the footprint edge, with debris jitter.
      const double z = std::max(0.0, height * (1.0 - r) * rng_.uniform(0.4, 1.0) +
                                          tilt_u * u + tilt_v * v);
      emit(frame.place(u, v, z), {0.62, 0.42, 0.33}, kBuildingDamaged);
    }
  }

  void road_strip() {
    const double length = config_.extent * rng_.uniform(0.5, 0.8);
    const double width = length / config_.road_aspect;
    Frame frame = random_frame(length / 2.0, width / 2.0);
    for (std::size_t i = 0; i < config_.points_per_primitive; ++i) {
      const double u = rng_.uniform(-frame.half_x, frame.half_x);
      const double v = rng_.uniform(-frame.half_y, frame.half_y);
      emit(frame.place(u, v, 0.05), {0.24, 0.24, 0.27}, kRoad);
    }
  }

  void tree_blob() {
    const double h = config_.extent / 2.0;
    const double cx = rng_.uniform(-h, h), cy = rng_.uniform(-h, h);
    const double cz = rng_.uniform(3.0, 5.0);
    const double rxy = rng_.uniform(1.5, 2.5), rz = rng_.uniform(1.2, 2.0);
    for (std::size_t i = 0; i < config_.points_per_primitive; ++i) {
      double d[3] = {rng_.normal(), rng_.normal(), rng_.normal()};
      double norm = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      if (norm == 0.0) norm = 1.0;
      const double shell = rng_.uniform(0.7, 1.0);
      emit({cx + rxy * shell * d[0] / norm, cy + rxy * shell * d[1] / norm,
            cz + rz * shell * d[2] / norm},
           {0.20, 0.55, 0.22}, kTree);
    }
  }

 private:
  struct Frame {
    double cx, cy, cos_t, sin_t, half_x, half_y;
    Vec3 place(double u, double v, double z) const {
      return {cx + cos_t * u - sin_t * v, cy + sin_t * u + cos_t * v, z};
    }
  };

  Frame random_frame(double half_x, double half_y) {
    const double h = config_.extent / 2.0;
    const double theta = rng_.uniform(0.0, std::numbers::pi);
    return {rng_.uniform(-h, h) * 0.8, rng_.uniform(-h, h) * 0.8,
            std::cos(theta),           std::sin(theta),
            half_x,                    half_y};
  }

  Frame footprint(double lo, double hi) {
    const double sx = rng_.uniform(lo, hi), sy = rng_.uniform(lo, hi);
    return random_frame(sx / 2.0, sy / 2.0);
  }

  void emit(const Vec3& p, const Vec3& color, int label) {
    const double s = config_.noise_sigma;
    cloud_.positions.push_back({p[0] + rng_.normal(0.0, s), p[1] + rng_.normal(0.0, s),
                                p[2] + rng_.normal(0.0, s)});
    for (double c : color) {
      cloud_.features.push_back(
          std::clamp(c + rng_.normal(0.0, config_.color_noise), 0.0, 1.0));
    }
    cloud_.labels.push_back(label);
  }

  const SceneConfig& config_;
  PointCloud& cloud_;
  Rng rng_;
};

}  // namespace

PointCloud generate_scene(const SceneConfig& config) {
  config.validate();
  PointCloud cloud;
  cloud.feature_count = 3;
  cloud.class_count = kSceneClassCount;
  cloud.class_names = scene_class_names();
  SceneBuilder builder(config, cloud);
  for (std::size_t i = 0; i < config.ground_planes; ++i) builder.ground_plane();
  for (std::size_t i = 0; i < config.intact_boxes; ++i) builder.intact_box();
  for (std::size_t i = 0; i < config.collapsed_boxes; ++i) builder.collapsed_box();
  for (std::size_t i = 0; i < config.road_strips; ++i) builder.road_strip();
  for (std::size_t i = 0; i < config.tree_blobs; ++i) builder.tree_blob();
  return cloud;
}

}  // namespace ptsort::geometry
