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

#include "ipal/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ipal {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m;
  m.rows = rows.size();
  m.cols = rows.size() ? rows.begin()->size() : 0;
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows) {
    if (r.size() != m.cols) throw std::invalid_argument("Matrix::from_rows: ragged rows");
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

Csr Csr::from_pairs(std::size_t n,
                    std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  std::vector<std::pair<std::size_t, std::size_t>> sorted(pairs.begin(), pairs.end());
  for (const auto& [u, v] : sorted) {
    if (u >= n || v >= n) throw std::out_of_range("Csr::from_pairs: node id out of range");
  }
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  Csr csr;
  csr.n = n;
  csr.row_ptr.assign(n + 1, 0);
  csr.col.reserve(sorted.size());
  for (const auto& [u, v] : sorted) {
    ++csr.row_ptr[u + 1];
    csr.col.push_back(v);
  }
  for (std::size_t i = 0; i < n; ++i) csr.row_ptr[i + 1] += csr.row_ptr[i];
  return csr;
}

bool Csr::has_entry(std::size_t i, std::size_t j) const {
  auto nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

bool Csr::is_symmetric() const {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const std::size_t j = col[k];
      auto nb = neighbors(j);
      auto it = std::lower_bound(nb.begin(), nb.end(), i);
      if (it == nb.end() || *it != i) return false;
      const std::size_t kt = row_ptr[j] + static_cast<std::size_t>(it - nb.begin());
      if (value_at(k) != value_at(kt)) return false;
    }
  }
  return true;
}

Csr Csr::transposed() const {
  Csr t;
  t.n = n;
  t.row_ptr.assign(n + 1, 0);
  for (std::size_t c : col) ++t.row_ptr[c + 1];
  for (std::size_t i = 0; i < n; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col.resize(col.size());
  if (!values.empty()) t.values.resize(values.size());
  std::vector<std::size_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  // Rows visited in ascending order keep each transposed row sorted.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const std::size_t dst = cursor[col[k]]++;
      t.col[dst] = i;
      if (!values.empty()) t.values[dst] = values[k];
    }
  }
  return t;
}

Matrix Csr::to_dense() const {
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) d(i, col[k]) += value_at(k);
  return d;
}

bool all_finite(const Matrix& m) {
  return std::all_of(m.data.begin(), m.data.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace ipal
