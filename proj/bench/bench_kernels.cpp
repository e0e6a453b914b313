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


// Times the serial reference kernels against the OpenMP kernels on the shapes
// the encoder uses, and checks that both produce identical results.

#include <chrono>
#include <cstdio>
#include <functional>

#include "CLI11.hpp"
#include "ipal/graph_store.hpp"
#include "ipal/kernels.hpp"
#include "ipal/nn.hpp"
#include "support/gradcheck.hpp"

using namespace ipal;

namespace {

double best_of(std::size_t reps, const std::function<Matrix()>& f, Matrix& out) {
  double best = 1e300;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    out = f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

bool compare(const char* name, std::size_t reps, const std::function<Matrix()>& serial,
             const std::function<Matrix()>& parallel) {
  Matrix a, b;
  const double ts = best_of(reps, serial, a);
  const double tp = best_of(reps, parallel, b);
  const bool same = a == b;
  std::printf("%-26s %10.3f ms %10.3f ms %8.2fx  %s\n", name, 1e3 * ts, 1e3 * tp, ts / tp,
              same ? "identical" : "MISMATCH");
  return same;
}

// Encoder forward pass built from the serial kernels only.
Matrix reference_embed(const nn::GcnEncoder& enc, const nn::PreparedGraph& g) {
  Matrix h = kernels::reference::gemm(g.propagated_features, enc.w1.value);
  for (double& v : h.data) v = v > 0.0 ? v : 0.0;
  Matrix z = kernels::reference::spmm(g.a_hat, kernels::reference::gemm(h, enc.w2.value));
  for (std::size_t i = 0; i < z.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.cols; ++j) s += z(i, j) * z(i, j);
    const double n = std::sqrt(s);
    if (n > 0.0)
      for (std::size_t j = 0; j < z.cols; ++j) z(i, j) /= n;
  }
  return z;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial reference kernels against the OpenMP kernels"};
  std::size_t nodes_per_class = 1000, classes = 6, feature_dim = 64, reps = 5;
  double p_intra = 0.05, q_inter = 0.005;
  app.add_option("--nodes-per-class", nodes_per_class)->capture_default_str();
  app.add_option("--classes", classes)->capture_default_str();
  app.add_option("--feature-dim", feature_dim)->capture_default_str();
  app.add_option("--p-intra", p_intra)->capture_default_str();
  app.add_option("--q-inter", q_inter)->capture_default_str();
  app.add_option("--reps", reps, "best-of repetitions")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  graph::SbmParams p;
  p.classes = classes;
  p.nodes_per_class = nodes_per_class;
  p.p_intra = p_intra;
  p.q_inter = q_inter;
  p.feature_dim = feature_dim;
  const graph::FullGraph g = graph::generate_sbm(p);
  const nn::PreparedGraph prepared = nn::PreparedGraph::from(g.adjacency, g.features);
  const nn::GcnEncoder enc(feature_dim, 1);
  const std::size_t n = g.num_nodes, h = nn::GcnEncoder::kHidden;

  Rng rng(5);
  const Matrix x = testing::random_matrix(n, h, rng);
  const Matrix w = testing::random_matrix(h, h, rng);
  const Matrix y = testing::random_matrix(n, h, rng);

  std::printf("%zu nodes, %zu edges, %d threads\n\n", n, g.num_edges(), kernels::max_threads());
  std::printf("%-26s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");
  bool ok = true;
  ok &= compare("gemm  n x 128 x 128", reps, [&] { return kernels::reference::gemm(x, w); },
                [&] { return kernels::gemm(x, w); });
  ok &= compare("gemm_tn 128 x n x 128", reps, [&] { return kernels::reference::gemm_tn(x, y); },
                [&] { return kernels::gemm_tn(x, y); });
  ok &= compare("gemm_nt n x 128 x 128", reps, [&] { return kernels::reference::gemm_nt(x, w); },
                [&] { return kernels::gemm_nt(x, w); });
  ok &= compare("spmm  A_hat x (n x 128)", reps, [&] { return kernels::reference::spmm(prepared.a_hat, x); },
                [&] { return kernels::spmm(prepared.a_hat, x); });
  ok &= compare("encoder forward", reps, [&] { return reference_embed(enc, prepared); },
                [&] { return enc.embed(prepared); });
  return ok ? 0 : 1;
}
