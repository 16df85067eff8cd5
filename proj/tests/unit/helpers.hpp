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
#include <vector>

#include "ptsort/error.hpp"
#include "ptsort/geometry.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::testing {

inline geometry::PointCloud random_cloud(std::size_t n, std::uint64_t seed,
                                         std::size_t features = 0, int classes = 0,
                                         double extent = 1.0) {
  Rng rng(seed);
  geometry::PointCloud cloud;
  cloud.positions.resize(n);
  for (auto& p : cloud.positions) {
    for (auto& c : p) c = rng.uniform(0.0, extent);
  }
  cloud.feature_count = features;
  cloud.features.resize(n * features);
  for (auto& f : cloud.features) f = rng.uniform();
  if (classes > 0) {
    cloud.class_count = classes;
    cloud.labels.resize(n);
    for (auto& l : cloud.labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  }
  return cloud;
}

inline geometry::PointCloud line_cloud(const std::vector<double>& xs) {
  geometry::PointCloud cloud;
  for (double x : xs) cloud.positions.push_back({x, 0.0, 0.0});
  return cloud;
}

template <typename F>
ErrorCode error_code_of(F&& body) {
  try {
    body();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

}  // namespace ptsort::testing
