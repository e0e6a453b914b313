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

#include "ipal/kernels.hpp"

#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ipal::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelThreshold = 1 << 15;

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Matrix gemm(const Matrix& a, const Matrix& b) {
  check(a.cols == b.rows, "gemm: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  const auto m = static_cast<long>(a.rows);
  const std::size_t k = a.cols, n = b.cols;
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
#pragma omp parallel for schedule(static) if (a.rows * k * n > kParallelThreshold)
  for (long i = 0; i < m; ++i) {
    double* ci = pc + i * n;
    const double* ai = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      const double* bp = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += s * bp[j];
    }
  }
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check(a.rows == b.rows, "gemm_tn: row counts differ");
  Matrix c(a.cols, b.cols);
  const auto m = static_cast<long>(a.cols);
  const std::size_t k = a.rows, n = b.cols, lda = a.cols;
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* pc = c.data.data();
#pragma omp parallel for schedule(static) if (a.cols * k * n > kParallelThreshold)
  for (long p = 0; p < m; ++p) {
    double* cp = pc + p * n;
    for (std::size_t i = 0; i < k; ++i) {
      const double s = pa[i * lda + p];
      if (s == 0.0) continue;
      const double* bi = pb + i * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += s * bi[j];
    }
  }
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check(a.cols == b.cols, "gemm_nt: inner dimensions differ");
  // Transposing B first turns the inner loop into a contiguous axpy; each
  // output element still sums over p in increasing order.
  Matrix bt(b.cols, b.rows);
  for (std::size_t j = 0; j < b.rows; ++j)
    for (std::size_t p = 0; p < b.cols; ++p) bt(p, j) = b(j, p);
  return gemm(a, bt);
}

Matrix spmm(const Csr& s, const Matrix& x) {
  check(s.n == x.rows, "spmm: sparse matrix and dense operand disagree");
  Matrix y(s.n, x.cols);
  const auto n = static_cast<long>(s.n);
  const std::size_t d = x.cols;
#pragma omp parallel for schedule(static) if (s.nnz() * d > kParallelThreshold)
  for (long i = 0; i < n; ++i) {
    double* yi = y.data.data() + i * d;
    for (std::size_t k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
      const double w = s.value_at(k);
      const double* xj = x.data.data() + s.col[k] * d;
      for (std::size_t j = 0; j < d; ++j) yi[j] += w * xj[j];
    }
  }
  return y;
}

namespace reference {

Matrix gemm(const Matrix& a, const Matrix& b) {
  check(a.cols == b.rows, "gemm: inner dimensions differ");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) acc += a(i, p) * b(p, j);
      c(i, j) = acc;
    }
  return c;
}

Matrix gemm_tn(const Matrix& a, const Matrix& b) {
  check(a.rows == b.rows, "gemm_tn: row counts differ");
  Matrix c(a.cols, b.cols);
  for (std::size_t p = 0; p < a.cols; ++p)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < a.rows; ++i) acc += a(i, p) * b(i, j);
      c(p, j) = acc;
    }
  return c;
}

Matrix gemm_nt(const Matrix& a, const Matrix& b) {
  check(a.cols == b.cols, "gemm_nt: inner dimensions differ");
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < a.cols; ++p) acc += a(i, p) * b(j, p);
      c(i, j) = acc;
    }
  return c;
}

Matrix spmm(const Csr& s, const Matrix& x) {
  check(s.n == x.rows, "spmm: sparse matrix and dense operand disagree");
  Matrix y(s.n, x.cols);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) acc += s.value_at(k) * x(s.col[k], j);
      y(i, j) = acc;
    }
  return y;
}

}  // namespace reference

}  // namespace ipal::kernels
