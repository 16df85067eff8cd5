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

#include "ptsort/nn/matrix.hpp"

#include <cmath>

#include "ptsort/error.hpp"

namespace ptsort::nn {

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out = c.row(i).data();
    const double* lhs = a.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double s = lhs[k];
      const double* rhs = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out[j] += s * rhs[j];
    }
  }
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_at_b: row counts differ");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* lhs = a.row(k).data();
    const double* rhs = b.row(k).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double s = lhs[i];
      double* out = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) out[j] += s * rhs[j];
    }
  }
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_a_bt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* lhs = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* rhs = b.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += lhs[k] * rhs[k];
      c(i, j) = acc;
    }
  }
  return c;
}

void add_row_vector(Matrix& m, std::span<const double> v) {
  require(v.size() == m.cols(), "add_row_vector: width mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < v.size(); ++c) row[c] += v[c];
  }
}

void add_column_sums(const Matrix& m, std::span<double> out) {
  require(out.size() == m.cols(), "add_column_sums: width mismatch");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += row[c];
  }
}

void add_in_place(Matrix& dst, const Matrix& src) {
  require(dst.same_shape(src), "add_in_place: shape mismatch");
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), src.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < src.rows(), "gather_rows: index out of range");
    auto from = src.row(rows[r]);
    std::copy(from.begin(), from.end(), out.row(r).begin());
  }
  return out;
}

bool all_finite(const Matrix& m) {
  for (double v : m.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace ptsort::nn
