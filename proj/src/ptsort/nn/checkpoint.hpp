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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ptsort/nn/tensor.hpp"

namespace ptsort::nn {

inline constexpr int kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<StoredTensor> tensors;

  const StoredTensor& find(const std::string& name) const;
  /// Copies stored values into `targets`, matching by name and shape.
  void load_into(const TensorList& targets) const;
};

// Layout: one line of JSON (format tag, version, meta, tensor names and
// shapes) terminated by '\n', then every tensor's values back to back as
// little-endian IEEE-754 binary64, in header order.
void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                      const TensorList& tensors);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace ptsort::nn
