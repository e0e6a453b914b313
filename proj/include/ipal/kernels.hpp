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

#include "ipal/matrix.hpp"

// Dense and sparse products used by the encoder and the losses.
//
// The kernels in `ipal::kernels` are OpenMP-parallel over output rows. Each
// output element is produced by exactly one thread with a fixed summation
// order, so results are bitwise identical for any thread count. The
// `ipal::kernels::reference` versions are plain serial loops kept as a test
// oracle and as the baseline for the benchmark.

namespace ipal::kernels {

/// C = A·B
Matrix gemm(const Matrix& a, const Matrix& b);
/// C = Aᵀ·B
Matrix gemm_tn(const Matrix& a, const Matrix& b);
/// C = A·Bᵀ
Matrix gemm_nt(const Matrix& a, const Matrix& b);
/// Y = S·X
Matrix spmm(const Csr& s, const Matrix& x);

/// Worker threads the parallel kernels will use (1 when built without OpenMP).
int max_threads();

namespace reference {
Matrix gemm(const Matrix& a, const Matrix& b);
Matrix gemm_tn(const Matrix& a, const Matrix& b);
Matrix gemm_nt(const Matrix& a, const Matrix& b);
Matrix spmm(const Csr& s, const Matrix& x);
}  // namespace reference

}  // namespace ipal::kernels
