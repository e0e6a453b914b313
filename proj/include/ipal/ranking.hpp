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

#include <vector>

#include "ipal/matrix.hpp"

namespace ipal::rank {

struct PageRankScores {
  std::vector<double> scores;
  std::size_t iterations_used = 0;
  double residual = 0.0;     // L1 change of the last iteration
  bool converged = false;    // residual <= tol
};

/// Power iteration for r = α·Σ_{j∈N(i)} r_j / d_j + (1 − α), i.e. the
/// non-normalized convention where scores average to 1. The graph is taken as
/// undirected (in- and out-neighbours coincide); a node with no neighbours is
/// treated as linking to itself. Starts from r = 1 and stops once the L1
/// change drops below `tol` or after `max_iter` sweeps. Not converging is
/// reported through `converged`, not thrown.
PageRankScores pagerank(const Csr& adjacency, double alpha = 0.85, double tol = 1e-10,
                        std::size_t max_iter = 200);

}  // namespace ipal::rank
