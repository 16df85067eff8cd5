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

#include "ptsort/curves.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ptsort/error.hpp"
#include "ptsort/rng.hpp"

namespace ptsort::curves {

namespace {

void check_coord(const GridCoord& coord) {
  require(coord.bits >= 1 && coord.bits <= kMaxBitsPerAxis,
          "bits per axis must lie in [1, 20]");
  for (std::uint32_t c : coord.cell) {
    require((c >> coord.bits) == 0, "grid coordinate exceeds 2^bits - 1");
  }
}

}  // namespace

std::string variant_name(const CurveVariant& variant) {
  std::string name = variant.family == CurveFamily::kZOrder ? "z" : "hilbert";
  if (variant.reversed) name += "-rev";
  if (variant.axis_order != std::array<int, 3>{0, 1, 2}) {
    name += ':';
    for (int a : variant.axis_order) name += static_cast<char>('x' + a);
  }
  return name;
}

CurveVariant parse_variant(std::string_view name) {
  CurveVariant v;
  std::string_view base = name;
  if (const auto colon = name.find(':'); colon != std::string_view::npos) {
    base = name.substr(0, colon);
    const std::string_view axes = name.substr(colon + 1);
    require(axes.size() == 3, "axis suffix must name three axes");
    std::array<bool, 3> seen{};
    for (int i = 0; i < 3; ++i) {
      const int a = axes[static_cast<std::size_t>(i)] - 'x';
      require(a >= 0 && a < 3 && !seen[static_cast<std::size_t>(a)],
              "axis suffix must be a permutation of xyz");
      seen[static_cast<std::size_t>(a)] = true;
      v.axis_order[static_cast<std::size_t>(i)] = a;
    }
  }
  if (base.ends_with("-rev")) {
    v.reversed = true;
    base.remove_suffix(4);
  }
  if (base == "z") {
    v.family = CurveFamily::kZOrder;
  } else if (base == "hilbert") {
    v.family = CurveFamily::kHilbert;
  } else {
    fail("unknown curve variant '" + std::string(name) + "'");
  }
  return v;
}

std::vector<CurveVariant> default_warmup_variants() {
  return {parse_variant("z"), parse_variant("z-rev"), parse_variant("hilbert"),
          parse_variant("hilbert-rev")};
}

bool Permutation::is_valid() const {
  std::vector<bool> seen(order.size(), false);
  for (std::size_t p : order) {
    if (p >= order.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

std::vector<std::size_t> Permutation::inverse() const {
  std::vector<std::size_t> inv(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) inv[order[pos]] = pos;
  return inv;
}

Permutation Permutation::identity(std::size_t n) {
  Permutation p;
  p.order.resize(n);
  std::iota(p.order.begin(), p.order.end(), std::size_t{0});
  return p;
}

void require_valid(const Permutation& perm, std::size_t n) {
  require(perm.size() == n, "permutation length " + std::to_string(perm.size()) +
                                " does not match point count " + std::to_string(n));
  require(perm.is_valid(), "permutation is not a bijection");
}

std::vector<GridCoord> quantize(const geometry::PointCloud& cloud, int bits) {
  require(bits >= 1 && bits <= kMaxBitsPerAxis, "bits per axis must lie in [1, 20]");
  cloud.validate();
  geometry::Vec3 lo = cloud.positions[0];
  geometry::Vec3 hi = lo;
  for (const auto& p : cloud.positions) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  const double top = static_cast<double>((std::uint32_t{1} << bits) - 1);
  std::vector<GridCoord> out(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out[i].bits = bits;
    for (int a = 0; a < 3; ++a) {
      const double extent = hi[a] - lo[a];
      if (extent <= 0.0) continue;
      const double t = (cloud.positions[i][a] - lo[a]) / extent;
      out[i].cell[a] =
          static_cast<std::uint32_t>(std::clamp(std::floor(t * top), 0.0, top));
    }
  }
  return out;
}

std::uint64_t morton_encode(const GridCoord& coord) {
  check_coord(coord);
  std::uint64_t key = 0;
  for (int j = 0; j < coord.bits; ++j) {
    for (int a = 0; a < 3; ++a) {
      key |= static_cast<std::uint64_t>((coord.cell[a] >> j) & 1u) << (3 * j + a);
    }
  }
  return key;
}

GridCoord morton_decode(std::uint64_t key, int bits) {
  GridCoord coord;
  coord.bits = bits;
  for (int j = 0; j < bits; ++j) {
    for (int a = 0; a < 3; ++a) {
      coord.cell[a] |= static_cast<std::uint32_t>((key >> (3 * j + a)) & 1u) << j;
    }
  }
  return coord;
}

// Skilling's axes<->transpose mapping. In transposed form the Hilbert index
// bits are read MSB first, cycling x, y, z.
std::uint64_t hilbert_encode(const GridCoord& coord) {
  check_coord(coord);
  const int bits = coord.bits;
  std::array<std::uint32_t, 3> x = coord.cell;
  const std::uint32_t top = std::uint32_t{1} << (bits - 1);

  for (std::uint32_t q = top; q > 1; q >>= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 0; i < 3; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        const std::uint32_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  for (int i = 1; i < 3; ++i) x[i] ^= x[i - 1];
  std::uint32_t t = 0;
  for (std::uint32_t q = top; q > 1; q >>= 1) {
    if (x[2] & q) t ^= q - 1;
  }
  for (auto& v : x) v ^= t;

  std::uint64_t key = 0;
  for (int j = bits - 1; j >= 0; --j) {
    for (int i = 0; i < 3; ++i) key = (key << 1) | ((x[i] >> j) & 1u);
  }
  return key;
}

GridCoord hilbert_decode(std::uint64_t key, int bits) {
  require(bits >= 1 && bits <= kMaxBitsPerAxis, "bits per axis must lie in [1, 20]");
  std::array<std::uint32_t, 3> x{};
  for (int j = bits - 1; j >= 0; --j) {
    for (int i = 0; i < 3; ++i) {
      const int shift = 3 * j + (2 - i);
      x[i] |= static_cast<std::uint32_t>((key >> shift) & 1u) << j;
    }
  }

  const std::uint32_t n = std::uint32_t{2} << (bits - 1);
  std::uint32_t t = x[2] >> 1;
  for (int i = 2; i > 0; --i) x[i] ^= x[i - 1];
  x[0] ^= t;
  for (std::uint32_t q = 2; q != n; q <<= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 2; i >= 0; --i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  GridCoord coord;
  coord.bits = bits;
  coord.cell = x;
  return coord;
}

Permutation static_order(const geometry::PointCloud& cloud,
                         const CurveVariant& variant, int bits) {
  const std::vector<GridCoord> coords = quantize(cloud, bits);
  std::vector<std::uint64_t> keys(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    GridCoord swizzled;
    swizzled.bits = bits;
    for (int a = 0; a < 3; ++a) {
      swizzled.cell[a] = coords[i].cell[variant.axis_order[a]];
    }
    keys[i] = variant.family == CurveFamily::kZOrder ? morton_encode(swizzled)
                                                     : hilbert_encode(swizzled);
  }
  Permutation perm = Permutation::identity(cloud.size());
  std::stable_sort(perm.order.begin(), perm.order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  if (variant.reversed) std::reverse(perm.order.begin(), perm.order.end());
#ifdef PTSORT_CHECK_INVARIANTS
  require(perm.is_valid(), "static_order produced an invalid permutation");
#endif
  return perm;
}

const CurveVariant& pick_warmup_variant(std::uint64_t epoch, std::uint64_t seed,
                                        const std::vector<CurveVariant>& variants) {
  require(!variants.empty(), "warmup variant list is empty");
  const std::uint64_t h = splitmix64(seed ^ splitmix64(epoch + 0x51ED27A3ULL));
  return variants[static_cast<std::size_t>(h % variants.size())];
}

}  // namespace ptsort::curves
