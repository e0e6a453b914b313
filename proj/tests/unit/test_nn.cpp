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


#include "doctest.h"
#include "ipal/nn.hpp"
#include "support/grad_cases.hpp"

#include <cmath>
#include <sstream>

using namespace ipal;
using namespace ipal::testing;

namespace {

Csr edges(std::size_t n, std::vector<std::pair<std::size_t, std::size_t>> und) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (auto [u, v] : und) {
    pairs.emplace_back(u, v);
    pairs.emplace_back(v, u);
  }
  return Csr::from_pairs(n, pairs);
}

}  // namespace

TEST_CASE("normalized adjacency by hand") {
  CHECK(nn::normalize_adjacency(Csr::from_pairs(1, {})).to_dense() == Matrix::from_rows({{1.0}}));
  CHECK(nn::normalize_adjacency(edges(2, {{0, 1}})).to_dense() == Matrix(2, 2, 0.5));

  const Matrix p = nn::normalize_adjacency(edges(3, {{0, 1}, {1, 2}})).to_dense();
  CHECK(p(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(p(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(p(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(p(0, 2) == 0.0);
}

TEST_CASE("normalized adjacency is symmetric and rejects self-loops") {
  Rng rng(2);
  const Csr a = nn::normalize_adjacency(detail::random_graph(30, 0.2, rng));
  const Matrix d = a.to_dense();
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j) CHECK(d(i, j) == d(j, i));
  const std::vector<std::pair<std::size_t, std::size_t>> loop{{0, 0}};
  CHECK_THROWS_AS(nn::normalize_adjacency(Csr::from_pairs(1, loop)), std::invalid_argument);
}

TEST_CASE("zero weights give zero embeddings") {
  Rng rng(4);
  const auto g = nn::PreparedGraph::from(detail::random_graph(10, 0.3, rng), random_matrix(10, 5, rng));
  nn::GcnEncoder enc(5, 1, true);
  enc.w1.value = Matrix(5, 128);
  enc.w2.value = Matrix(128, 128);
  CHECK(enc.embed(g) == Matrix(10, 128));
}

TEST_CASE("single node encodes as relu(x W1) W2") {
  const Matrix x = Matrix::from_rows({{0.5, -1.0, 2.0}});
  const auto g = nn::PreparedGraph::from(Csr::from_pairs(1, {}), x);
  nn::GcnEncoder enc(3, 7, false);
  Matrix h(1, 128);
  for (std::size_t j = 0; j < 128; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) s += x(0, k) * enc.w1.value(k, j);
    h(0, j) = std::max(0.0, s);
  }
  const Matrix out = enc.embed(g);
  for (std::size_t j = 0; j < 128; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < 128; ++k) s += h(0, k) * enc.w2.value(k, j);
    CHECK(out(0, j) == doctest::Approx(s).epsilon(1e-12));
  }
}

TEST_CASE("normalized outputs have unit rows and encode matches embed") {
  Rng rng(5);
  const auto g = nn::PreparedGraph::from(detail::random_graph(25, 0.15, rng), random_matrix(25, 6, rng));
  nn::GcnEncoder enc(6, 3, true);
  const Matrix e = enc.embed(g);
  for (std::size_t i = 0; i < e.rows; ++i) {
    double s = 0.0;
    for (double v : e.row(i)) s += v * v;
    CHECK(std::abs(std::sqrt(s) - 1.0) < 1e-12);
  }
  ad::Tape t;
  CHECK(enc.encode(t, g).value() == e);
  CHECK(enc.embed(g) == e);
}

TEST_CASE("encoder rejects a feature dimension mismatch") {
  Rng rng(5);
  const auto g = nn::PreparedGraph::from(detail::random_graph(4, 0.5, rng), random_matrix(4, 3, rng));
  nn::GcnEncoder enc(6, 3, true);
  CHECK_THROWS_AS(enc.embed(g), std::invalid_argument);
  CHECK_THROWS_AS(nn::PreparedGraph::from(Csr::from_pairs(3, {}), Matrix(4, 2)), std::invalid_argument);
}

TEST_CASE("encoder gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    const auto g = nn::PreparedGraph::from(detail::random_graph(12, 0.3, rng), random_matrix(12, 4, rng));
    nn::GcnEncoder enc(4, seed, true);
    const Matrix w = random_matrix(12, 128, rng);
    const auto r = gradcheck(enc.parameters(), [&](ad::Tape& t) { return detail::probe(enc.encode(t, g), w); }, 50,
                             seed);
    CHECK(r.max_rel_error < kGradTolerance);
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  auto p = make_param("p", Matrix::from_rows({{1.0, -2.0}}));
  nn::AdamState s;
  nn::adam_step(p, s, 0.1);
  CHECK(p.value == Matrix::from_rows({{1.0, -2.0}}));
}

TEST_CASE("adam: first step by hand") {
  auto p = make_param("p", Matrix::from_rows({{1.0, -2.0, 0.5}}));
  p.grad = Matrix::from_rows({{0.3, -4.0, 0.0}});
  nn::AdamState s;
  nn::adam_step(p, s, 0.01);
  // m̂ = g and v̂ = g² after bias correction, so the step is lr·g/(|g|+ε).
  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(p.value(0, 1) == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(p.value(0, 2) == 0.5);
}

TEST_CASE("adam: identical runs are bitwise identical") {
  auto run = [] {
    Rng rng(9);
    auto p = make_param("p", random_matrix(3, 3, rng));
    nn::Adam opt({&p}, 1e-2);
    for (int i = 0; i < 20; ++i) {
      opt.zero_grad();
      ad::Tape t;
      auto x = t.param(p);
      t.backward(ad::sum(ad::mul(ad::exp(x), x)));
      opt.step();
    }
    return p.value;
  };
  CHECK(run() == run());
}

TEST_CASE("adam: state shape mismatch throws") {
  auto p = make_param("p", Matrix(2, 2));
  nn::AdamState s;
  s.m = Matrix(1, 1);
  s.v = Matrix(1, 1);
  CHECK_THROWS_AS(nn::adam_step(p, s, 0.1), std::invalid_argument);
}

TEST_CASE("classifier grows monotonically and keeps old columns") {
  nn::LinearClassifier head(4, true);
  head.grow({0, 1}, 1);
  const Matrix before = head.weight.value;
  head.bias.value(0, 1) = 0.25;
  head.grow({2}, 2);
  CHECK(head.weight.value.cols == 3);
  CHECK(head.bias.value(0, 1) == 0.25);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(head.weight.value(i, j) == before(i, j));
  CHECK(head.column_of(2) == 2);
  CHECK_THROWS_AS(head.column_of(9), std::out_of_range);
  CHECK_THROWS_AS(head.grow({1}, 3), std::invalid_argument);
}

TEST_CASE("classifier bias is optional") {
  Rng rng(1);
  nn::LinearClassifier with(3, true), without(3, false);
  with.grow({0, 1}, 5);
  without.grow({0, 1}, 5);
  with.bias.value = Matrix::from_rows({{1.0, -1.0}});
  const Matrix f = random_matrix(2, 3, rng);
  const Matrix a = with.logits(f), b = without.logits(f);
  CHECK(a(0, 0) == doctest::Approx(b(0, 0) + 1.0).epsilon(1e-14));
  CHECK(without.parameters().size() == 1);
  CHECK(with.parameters().size() == 2);
}

TEST_CASE("parameter checkpoints round-trip bitwise") {
  nn::GcnEncoder enc(5, 11, true);
  enc.w1.value(0, 0) = -0.0;
  enc.w1.value(1, 1) = 1e-310;
  std::stringstream ss;
  nn::write_parameters(ss, std::vector<const ad::Parameter*>{&enc.w1, &enc.w2});
  const auto back = nn::read_parameters(ss);
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "encoder.w1");
  CHECK(back[0].value == enc.w1.value);
  CHECK(std::signbit(back[0].value(0, 0)));
  CHECK(back[1].value == enc.w2.value);

  std::istringstream bad("not a checkpoint");
  CHECK_THROWS(nn::read_parameters(bad));
  CHECK(nn::decode_double(nn::encode_double(0.1)) == 0.1);
  CHECK_THROWS(nn::decode_double("123"));
}

TEST_CASE("checkpoint size depends only on shapes") {
  nn::GcnEncoder a(5, 1, true), b(5, 2, true);
  std::ostringstream sa, sb;
  nn::write_parameters(sa, std::vector<const ad::Parameter*>{&a.w1, &a.w2});
  nn::write_parameters(sb, std::vector<const ad::Parameter*>{&b.w1, &b.w2});
  CHECK(sa.str().size() == sb.str().size());
}
