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
#include "ipal/autodiff.hpp"
#include "support/grad_cases.hpp"

#include <cmath>
#include <limits>

using namespace ipal;
using namespace ipal::testing;

TEST_CASE("every primitive passes the finite-difference check on 10 seeds") {
  for (const auto& c : primitive_cases()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = c.run(seed);
      INFO(c.name << " seed " << seed);
      CHECK(r.coords_checked > 0);
      CHECK(r.max_rel_error < kGradTolerance);
    }
  }
}

TEST_CASE("gradient of sum is all ones") {
  Rng rng(1);
  auto w = make_param("w", random_matrix(3, 4, rng));
  ad::Tape t;
  t.backward(ad::sum(t.param(w)));
  CHECK(w.grad == Matrix(3, 4, 1.0));
  CHECK(t.size() == 0);
}

TEST_CASE("gradient of a squared norm is twice the vector") {
  auto v = make_param("v", Matrix::from_rows({{1.5, -2.0, 0.25}}));
  ad::Tape t;
  const auto x = t.param(v);
  t.backward(ad::sum(ad::mul(x, x)));
  CHECK(v.grad == Matrix::from_rows({{3.0, -4.0, 0.5}}));
}

TEST_CASE("gradients accumulate across backward passes until zeroed") {
  auto v = make_param("v", Matrix(1, 2, 1.0));
  for (int i = 0; i < 2; ++i) {
    ad::Tape t;
    t.backward(ad::sum(t.param(v)));
  }
  CHECK(v.grad == Matrix(1, 2, 2.0));
  v.zero_grad();
  CHECK(v.grad.empty());
}

TEST_CASE("backward on a non-scalar throws") {
  auto v = make_param("v", Matrix(2, 2, 1.0));
  ad::Tape t;
  CHECK_THROWS_AS(t.backward(t.param(v)), std::invalid_argument);
}

TEST_CASE("non-finite results throw instead of propagating") {
  ad::Tape t;
  CHECK_THROWS_AS(ad::log(t.constant(Matrix(1, 1, 0.0))), std::domain_error);
  CHECK_THROWS_AS(ad::exp(t.constant(Matrix(1, 1, 1000.0))), std::domain_error);
  auto bad = make_param("bad", Matrix(1, 1, std::numeric_limits<double>::quiet_NaN()));
  CHECK_THROWS_AS(t.param(bad), std::domain_error);
}

TEST_CASE("shape mismatches throw") {
  ad::Tape t;
  const auto a = t.constant(Matrix(2, 3));
  const auto b = t.constant(Matrix(2, 2));
  CHECK_THROWS(ad::matmul(a, b));
  CHECK_THROWS(ad::add(a, b));
}

TEST_CASE("row normalize leaves zero rows alone with identity gradient") {
  auto a = make_param("a", Matrix::from_rows({{3, 4}, {0, 0}}));
  ad::Tape t;
  const auto out = ad::row_normalize(t.param(a));
  CHECK(out.value() == Matrix::from_rows({{0.6, 0.8}, {0, 0}}));
  const Matrix w = Matrix::from_rows({{1, 2}, {5, 7}});
  t.backward(ad::sum(ad::mul(out, t.constant(w))));
  CHECK(a.grad(1, 0) == 5.0);
  CHECK(a.grad(1, 1) == 7.0);
}

TEST_CASE("logsumexp is shift invariant and stable for large logits") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = random_matrix(3, 6, rng, -50.0, 50.0);
    Matrix shifted = x;
    for (std::size_t j = 0; j < 6; ++j) shifted(1, j) += 700.0;
    ad::Tape t;
    const Matrix a = ad::row_logsumexp(t.constant(x)).value();
    const Matrix b = ad::row_logsumexp(t.constant(shifted)).value();
    CHECK(std::abs(b(1, 0) - a(1, 0) - 700.0) < 1e-10);
    CHECK(b(0, 0) == a(0, 0));
  }
}

TEST_CASE("masked logsumexp ignores dropped columns") {
  ad::Tape t;
  ad::RowMask mask(1, 3);
  mask.drop(0, 1);
  const auto v = ad::row_logsumexp(t.constant(Matrix::from_rows({{0.0, 100.0, 0.0}})), &mask);
  CHECK(v.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("gather and pick index correctly") {
  ad::Tape t;
  const auto a = t.constant(Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}}));
  const std::vector<std::size_t> rows{2, 0}, cols{1, 0, 1};
  CHECK(ad::gather_rows(a, rows).value() == Matrix::from_rows({{5, 6}, {1, 2}}));
  CHECK(ad::pick(a, cols).value() == Matrix::from_rows({{2}, {3}, {6}}));
}

TEST_CASE("constants receive no parameter gradient") {
  auto p = make_param("p", Matrix(1, 2, 1.0));
  ad::Tape t;
  const auto c = t.constant(Matrix(1, 2, 3.0));
  t.backward(ad::sum(ad::mul(t.param(p), c)));
  CHECK(p.grad == Matrix(1, 2, 3.0));
}
