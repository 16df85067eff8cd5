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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ptsort::verify {

struct GradCase {
  std::string name;
  std::size_t seeds = 0;
  std::size_t coordinates = 0;  // per seed
  double max_error = 0.0;
  std::uint64_t worst_seed = 0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradSuiteReport {
  double step = 1e-5;
  std::vector<GradCase> cases;
  double seconds = 0.0;

  bool passed() const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Central-difference checks of every backward pass: batch-norm/GELU MLP in
/// both modes, sigmoid scoring, both ordering losses and their sum, softmax
/// cross-entropy, windowed attention and the full segmentation pipeline.
/// Each case runs `seeds` independent random instances starting at
/// `base_seed` and keeps the worst relative error.
GradSuiteReport run_grad_suite(std::size_t seeds = 20, std::uint64_t base_seed = 0);

std::vector<std::string> grad_case_names();

}  // namespace ptsort::verify
