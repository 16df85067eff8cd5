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
#include <string>
#include <string_view>
#include <vector>

#include "ptsort/geometry.hpp"

namespace ptsort::curves {

inline constexpr int kMaxBitsPerAxis = 20;
inline constexpr int kDefaultBitsPerAxis = 10;

struct GridCoord {
  std::array<std::uint32_t, 3> cell{};
  int bits = kDefaultBitsPerAxis;
};

enum class CurveFamily { kZOrder, kHilbert };

struct CurveVariant {
  CurveFamily family = CurveFamily::kZOrder;
  std::array<int, 3> axis_order{0, 1, 2};
  bool reversed = false;

  bool operator==(const CurveVariant&) const = default;
};

/// Short name used on the command line and in reports: `z`, `z-rev`,
/// `hilbert`, `hilbert-rev`, with an optional `:yxz`-style axis suffix.
std::string variant_name(const CurveVariant& variant);
CurveVariant parse_variant(std::string_view name);

/// {z, z-rev, hilbert, hilbert-rev}.
std::vector<CurveVariant> default_warmup_variants();

/// A bijective reordering: position p of the sequence holds point order[p].
struct Permutation {
  std::vector<std::size_t> order;

  std::size_t size() const { return order.size(); }
  bool is_valid() const;
  /// inverse()[point] = serialized position of that point.
  std::vector<std::size_t> inverse() const;
  static Permutation identity(std::size_t n);
};

void require_valid(const Permutation& perm, std::size_t n);

/// Per-axis affine map of the bounding box onto [0, 2^bits - 1]; cell index
/// is floor(t * (2^bits - 1)) clamped to the grid. Flat axes map to 0.
std::vector<GridCoord> quantize(const geometry::PointCloud& cloud, int bits);

/// Bit interleave with x in the least significant position.
std::uint64_t morton_encode(const GridCoord& coord);
GridCoord morton_decode(std::uint64_t key, int bits);

/// 3D Hilbert index via the transpose (Gray code) construction. Consecutive
/// keys are face-adjacent cells.
std::uint64_t hilbert_encode(const GridCoord& coord);
GridCoord hilbert_decode(std::uint64_t key, int bits);

/// Sorts points by curve key (ties: smaller index), reversed on request.
Permutation static_order(const geometry::PointCloud& cloud,
                         const CurveVariant& variant,
                         int bits = kDefaultBitsPerAxis);

/// Deterministic choice keyed by (seed, epoch), uniform over `variants`.
const CurveVariant& pick_warmup_variant(std::uint64_t epoch, std::uint64_t seed,
                                        const std::vector<CurveVariant>& variants);

}  // namespace ptsort::curves
