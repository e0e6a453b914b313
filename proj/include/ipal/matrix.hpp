// Copyright 2026 The IPAL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace ipal {

/// Dense row-major f64 matrix. Vectors are 1×n or n×1 matrices.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// Compressed sparse row matrix. An empty `values` array means every stored
/// entry is 1 (plain adjacency).
struct Csr {
  std::size_t n = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::size_t> col;
  std::vector<double> values;

  std::size_t nnz() const { return col.size(); }
  std::size_t degree(std::size_t i) const { return row_ptr[i + 1] - row_ptr[i]; }
  std::span<const std::size_t> neighbors(std::size_t i) const {
    return {col.data() + row_ptr[i], degree(i)};
  }
  double value_at(std::size_t k) const { return values.empty() ? 1.0 : values[k]; }

  /// Builds a CSR matrix from (row, col) pairs; duplicates are merged and
  /// columns within each row are sorted.
  static Csr from_pairs(std::size_t n,
                        std::span<const std::pair<std::size_t, std::size_t>> pairs);

  bool has_entry(std::size_t i, std::size_t j) const;
  bool is_symmetric() const;
  Csr transposed() const;
  Matrix to_dense() const;

  friend bool operator==(const Csr&, const Csr&) = default;
};

bool all_finite(const Matrix& m);

}  // namespace ipal
