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

#include "ipal/ranking.hpp"

#include <cmath>
#include <stdexcept>

namespace ipal::rank {

PageRankScores pagerank(const Csr& adjacency, double alpha, double tol, std::size_t max_iter) {
  const std::size_t n = adjacency.n;
  if (n == 0) throw std::invalid_argument("pagerank: empty graph");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("pagerank: damping must be in [0, 1)");

  PageRankScores out;
  std::vector<double> r(n, 1.0), next(n), share(n);
  while (out.iterations_used < max_iter) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t d = adjacency.degree(j);
      share[j] = d ? r[j] / static_cast<double>(d) : 0.0;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      if (adjacency.degree(i) == 0) {
        acc = r[i];  // dangling self-link
      } else {
        for (std::size_t j : adjacency.neighbors(i)) acc += share[j];
      }
      next[i] = alpha * acc + (1.0 - alpha);
      change += std::fabs(next[i] - r[i]);
    }
    r.swap(next);
    ++out.iterations_used;
    out.residual = change;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.scores = std::move(r);
  return out;
}

}  // namespace ipal::rank
