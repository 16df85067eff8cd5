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

#include "ptsort/nn/tensor.hpp"

#include <algorithm>

#include "ptsort/error.hpp"

namespace ptsort::nn {

std::vector<double> flatten(const TensorList& tensors) {
  std::vector<double> flat;
  flat.reserve(element_count(tensors));
  for (const auto& t : tensors) flat.insert(flat.end(), t.values.begin(), t.values.end());
  return flat;
}

void unflatten(std::span<const double> flat, const TensorList& tensors) {
  require(flat.size() == element_count(tensors), "unflatten: size mismatch");
  std::size_t offset = 0;
  for (const auto& t : tensors) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.values.size(),
                t.values.begin());
    offset += t.values.size();
  }
}

std::size_t element_count(const TensorList& tensors) {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

}  // namespace ptsort::nn
