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
#include <string>
#include <vector>

namespace ptsort::nn {

/// Named, shaped view over parameter storage owned elsewhere. Parameter
/// containers expose their tensors as a TensorList so the optimizer, the
/// checkpoint writer and the gradient checker can treat them uniformly.
struct TensorView {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
};

using TensorList = std::vector<TensorView>;

/// Concatenation of all values, in list order.
std::vector<double> flatten(const TensorList& tensors);
void unflatten(std::span<const double> flat, const TensorList& tensors);
std::size_t element_count(const TensorList& tensors);

}  // namespace ptsort::nn
