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
#include "ipal/objectives.hpp"
#include "support/grad_cases.hpp"

#include <cmath>
#include <numeric>

using namespace ipal;
using namespace ipal::testing;
using proto::ClassPrototype;

namespace {

ClassPrototype proto_of(graph::ClassId c, std::vector<double> mean) {
  ClassPrototype p;
  p.class_id = c;
  p.diag_variance.assign(mean.size(), 0.0);
  p.mean = std::move(mean);
  return p;
}

double eval_loss(const Matrix& emb, const std::function<ad::Var(ad::Var)>& fn) {
  ad::Tape t;
  return fn(t.constant(emb)).item();
}

// Density of Beta(a, b) at x.
double beta_pdf(double x, double a, double b) {
  return std::exp((a - 1) * std::log(x) + (b - 1) * std::log1p(-x) + std::lgamma(a + b) - std::lgamma(a) -
                  std::lgamma(b));
}

}  // namespace

TEST_CASE("every objective passes the finite-difference check on 10 seeds") {
  for (const auto& c : objective_cases()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto r = c.run(seed);
      INFO(c.name << " seed " << seed);
      CHECK(r.max_rel_error < kGradTolerance);
    }
  }
}

TEST_CASE("pcl: a lone class with no negatives has zero loss") {
  const Matrix emb = Matrix::from_rows({{0.6, 0.8}});
  const std::vector<graph::ClassId> labels{0};
  const std::vector<std::size_t> anchors{0};
  const std::vector<ClassPrototype> online{proto_of(0, {1, 0})};
  const double l = eval_loss(emb, [&](ad::Var e) {
    return loss::pcl_loss(e, labels, anchors, online, proto::MemoryBuffer(), 0.07, true);
  });
  CHECK(l == 0.0);
}

TEST_CASE("pcl: one negative at equal similarity gives log 2") {
  const Matrix emb = Matrix::from_rows({{1, 0}});
  const std::vector<graph::ClassId> labels{1};
  const std::vector<std::size_t> anchors{0};
  const std::vector<ClassPrototype> online{proto_of(1, {0.6, 0.8})};
  proto::MemoryBuffer buffer;
  buffer.insert(proto_of(0, {0.6, -0.8}));
  const double l = eval_loss(emb, [&](ad::Var e) { return loss::pcl_loss(e, labels, anchors, online, buffer, 0.07, true); });
  CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("pcl: a label without an online prototype throws") {
  const Matrix emb = Matrix::from_rows({{1, 0}});
  const std::vector<graph::ClassId> labels{3};
  const std::vector<std::size_t> anchors{0};
  const std::vector<ClassPrototype> online{proto_of(1, {1, 0})};
  ad::Tape t;
  CHECK_THROWS_AS(loss::pcl_loss(t.constant(emb), labels, anchors, online, proto::MemoryBuffer(), 0.07, true),
                  std::invalid_argument);
  CHECK_THROWS_AS(loss::pcl_loss(t.constant(emb), labels, anchors, online, proto::MemoryBuffer(), 0.0, true),
                  std::invalid_argument);
}

TEST_CASE("prototype table order and conflicts") {
  proto::MemoryBuffer buffer;
  buffer.insert(proto_of(1, {0, 2}));
  buffer.insert(proto_of(0, {3, 0}));
  const std::vector<ClassPrototype> online{proto_of(5, {1, 1}), proto_of(4, {0, 1})};
  const auto table = loss::PrototypeTable::build(online, buffer, true);
  CHECK(table.classes == std::vector<graph::ClassId>{4, 5, 0, 1});
  CHECK(table.num_online == 2);
  CHECK(table.row_of(0) == 2);
  CHECK(table.means(2, 0) == 1.0);
  CHECK_THROWS_AS(table.row_of(9), std::out_of_range);
  const std::vector<ClassPrototype> clash{proto_of(1, {1, 0})};
  CHECK_THROWS_AS(loss::PrototypeTable::build(clash, buffer, true), std::invalid_argument);
}

TEST_CASE("entropy: uniform, peaked and Top-K selection") {
  const Matrix protos = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Matrix emb = Matrix::from_rows({{0, 0, 0}, {10, 0, 0}, {1, 0, 0}, {0.2, 0, 0}});
  const std::vector<std::size_t> nodes{0, 1, 2, 3};
  const auto h = loss::prototype_entropy(emb, nodes, protos);
  CHECK(h[0] == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  const double z = std::exp(10.0) + 2.0;
  const double peaked = -(std::exp(10.0) / z) * std::log(std::exp(10.0) / z) - 2.0 * (1.0 / z) * std::log(1.0 / z);
  CHECK(h[1] == doctest::Approx(peaked).epsilon(1e-12));
  CHECK(h[1] < 1e-3);

  // All four in one class: entropies order 0 > 3 > 2 > 1, so K=2 takes 0 and 3.
  const std::vector<graph::ClassId> labels{7, 7, 7, 7};
  const std::vector<graph::ClassId> cur{7};
  const auto hard = loss::select_hard_examples(emb, labels, nodes, protos, cur, 2);
  REQUIRE(hard.size() == 2);
  CHECK(hard.examples[0].node == 0);
  CHECK(hard.examples[1].node == 3);
  CHECK(hard.examples[0].entropy >= hard.examples[1].entropy);
}

TEST_CASE("hard examples: ties go to the lower node, K is capped by the class size") {
  const Matrix protos = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix emb = Matrix::from_rows({{1, 1}, {1, 1}, {1, 1}, {5, 0}});
  const std::vector<std::size_t> nodes{0, 1, 2, 3};
  const std::vector<graph::ClassId> labels{0, 0, 0, 1};
  const std::vector<graph::ClassId> cur{0, 1};
  const auto hard = loss::select_hard_examples(emb, labels, nodes, protos, cur, 2);
  REQUIRE(hard.size() == 3);
  CHECK(hard.examples[0].node == 0);
  CHECK(hard.examples[1].node == 1);
  CHECK(hard.examples[2].node == 3);
}

TEST_CASE("dbp: reduces to pcl bitwise without hard examples or stored classes") {
  Rng rng(4);
  const Matrix emb = random_matrix(8, 5, rng);
  std::vector<graph::ClassId> labels(8);
  std::vector<std::size_t> anchors(8);
  for (std::size_t i = 0; i < 8; ++i) {
    labels[i] = static_cast<graph::ClassId>(i % 2);
    anchors[i] = i;
  }
  const std::vector<ClassPrototype> online{proto_of(0, random_matrix(1, 5, rng).data),
                                           proto_of(1, random_matrix(1, 5, rng).data)};
  const proto::MemoryBuffer empty;
  const double a = eval_loss(emb, [&](ad::Var e) { return loss::pcl_loss(e, labels, anchors, online, empty, 0.07, true); });
  const double b = eval_loss(emb, [&](ad::Var e) {
    return loss::pcl_dbp_loss(e, labels, anchors, online, empty, loss::HardExampleSet{}, 10, 0.07, 3, true);
  });
  CHECK(a == b);
}

TEST_CASE("dbp: a hard negative at equal similarity moves log 2 to log 3") {
  // Anchor 0 (class 0) sees its own prototype, the class-1 prototype and the
  // class-1 hard example, all at the same similarity.
  const Matrix emb = Matrix::from_rows({{1, 0}, {0, 1}});
  const std::vector<graph::ClassId> labels{0, 1};
  const std::vector<std::size_t> anchors{0};
  const std::vector<ClassPrototype> online{proto_of(0, {0.6, 0.8}), proto_of(1, {0.6, -0.8})};
  loss::HardExampleSet hard;
  hard.examples.push_back({1, 1, 0.0});
  const proto::MemoryBuffer empty;
  auto hard_emb = emb;
  hard_emb(1, 0) = 0.6;
  hard_emb(1, 1) = 0.0;
  const double two = eval_loss(hard_emb, [&](ad::Var e) { return loss::pcl_loss(e, labels, anchors, online, empty, 0.07, true); });
  const double three = eval_loss(hard_emb, [&](ad::Var e) {
    return loss::pcl_dbp_loss(e, labels, anchors, online, empty, hard, 0, 0.07, 0, true);
  });
  CHECK(two == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(three == doctest::Approx(std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("dbp: a same-class hard example is not a negative") {
  const Matrix emb = Matrix::from_rows({{1, 0}, {0.6, 0}});
  const std::vector<graph::ClassId> labels{0, 0};
  const std::vector<std::size_t> anchors{0};
  const std::vector<ClassPrototype> online{proto_of(0, {0.6, 0.8}), proto_of(1, {0.6, -0.8})};
  loss::HardExampleSet hard;
  hard.examples.push_back({1, 0, 0.0});
  const proto::MemoryBuffer empty;
  const double l = eval_loss(emb, [&](ad::Var e) {
    return loss::pcl_dbp_loss(e, labels, anchors, online, empty, hard, 0, 0.07, 0, true);
  });
  CHECK(l == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("replay draws: k per stored class in ascending order") {
  proto::MemoryBuffer buffer;
  ClassPrototype a = proto_of(3, {1, 0}), b = proto_of(1, {0, 1});
  a.diag_variance = {0.1, 0.1};
  buffer.insert(a);
  buffer.insert(b);
  std::vector<graph::ClassId> row_classes;
  const Matrix draws = loss::draw_replay(buffer, 4, 9, true, &row_classes);
  CHECK(draws.rows == 8);
  CHECK(row_classes == std::vector<graph::ClassId>{1, 1, 1, 1, 3, 3, 3, 3});
  CHECK(draws(0, 1) == 1.0);
  CHECK(loss::draw_replay(buffer, 0, 9, true).empty());
  CHECK(loss::draw_replay(proto::MemoryBuffer(), 4, 9, true).empty());
  CHECK(loss::draw_replay(buffer, 4, 9, true) == draws);
}

TEST_CASE("mixup coefficients: truncated Beta(9, 21) on [0, 0.4]") {
  Rng rng(17);
  const std::size_t n = 200000;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = loss::draw_mixup_lambda(rng);
    REQUIRE(l >= 0.0);
    REQUIRE(l <= 0.4);
    sum += l;
  }
  // Oracle: E[λ | λ <= 0.4] by composite Simpson integration of the density.
  const std::size_t m = 20000;
  const double hstep = 0.4 / m;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i <= m; ++i) {
    const double x = i * hstep;
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = x > 0.0 ? beta_pdf(x, 9, 21) : 0.0;
    num += w * x * f;
    den += w * f;
  }
  const double expected = num / den;
  // Standard deviation of the truncated law is under 0.085.
  CHECK(std::abs(sum / n - expected) < 4.0 * 0.085 / std::sqrt(double(n)));
}

TEST_CASE("ipad: identical encoders give exactly zero") {
  Rng rng(2);
  const Matrix emb = random_matrix(12, 6, rng);
  proto::MemoryBuffer buffer;
  for (graph::ClassId c = 0; c < 3; ++c) buffer.insert(proto_of(c, proto::unit(random_matrix(1, 6, rng).data)));
  std::vector<std::size_t> nodes(12);
  std::iota(nodes.begin(), nodes.end(), 0);
  ad::Tape t;
  const auto r = loss::ipad_loss(emb, t.constant(emb), nodes, buffer, 100, 5, true);
  CHECK(r.loss.item() == 0.0);
  CHECK(r.kept.size() + r.filtered == 12 * 3);
}

TEST_CASE("ipad: empty buffer and base task give zero") {
  Rng rng(2);
  const Matrix emb = random_matrix(4, 3, rng);
  const std::vector<std::size_t> nodes{0, 1, 2, 3};
  ad::Tape t;
  const auto r = loss::ipad_loss(emb, t.constant(random_matrix(4, 3, rng)), nodes, proto::MemoryBuffer(), 100, 5, true);
  CHECK(r.loss.item() == 0.0);
  CHECK(r.kept.empty());
}

TEST_CASE("ipad: single prior class and single node by hand") {
  const Matrix old = Matrix::from_rows({{0.2, 0.9, -0.1}});
  const Matrix neu = Matrix::from_rows({{0.5, 0.1, 0.3}});
  proto::MemoryBuffer buffer;
  buffer.insert(proto_of(0, {0.0, 0.6, 0.8}));
  const std::vector<std::size_t> nodes{0};
  ad::Tape t;
  const auto r = loss::ipad_loss(old, t.constant(neu), nodes, buffer, 100, 11, true);
  REQUIRE(r.kept.size() == 1);  // one prototype always wins its own argmax
  const double lam = r.kept[0].lambda;
  CHECK(lam <= 0.4);
  // |λ (f_new − f_old)·μ|; the (1 − λ)μ·μ parts cancel.
  const double expected = std::abs(lam * ((0.5 - 0.2) * 0.0 + (0.1 - 0.9) * 0.6 + (0.3 + 0.1) * 0.8));
  CHECK(r.loss.item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("ipad: kept pairs satisfy the argmax condition and subset size is respected") {
  Rng rng(6);
  // Large old features so that some mixed points cross to another prototype.
  const Matrix old = random_matrix(30, 6, rng, -10.0, 10.0);
  const Matrix neu = random_matrix(30, 6, rng);
  proto::MemoryBuffer buffer;
  std::vector<std::vector<double>> mus;
  for (graph::ClassId c = 0; c < 4; ++c) {
    mus.push_back(proto::unit(random_matrix(1, 6, rng).data));
    buffer.insert(proto_of(c, mus.back()));
  }
  std::vector<std::size_t> nodes(30);
  std::iota(nodes.begin(), nodes.end(), 0);
  ad::Tape t;
  const auto r = loss::ipad_loss(old, t.constant(neu), nodes, buffer, 10, 3, true);
  CHECK(r.kept.size() + r.filtered == 10 * 4);
  CHECK(r.filtered > 0);
  for (const auto& pair : r.kept) {
    std::vector<double> mixed(6);
    for (std::size_t j = 0; j < 6; ++j)
      mixed[j] = pair.lambda * old(pair.node, j) + (1.0 - pair.lambda) * mus[pair.class_id][j];
    const double own = std::inner_product(mixed.begin(), mixed.end(), mus[pair.class_id].begin(), 0.0);
    for (std::size_t q = 0; q < 4; ++q)
      CHECK(own >= std::inner_product(mixed.begin(), mixed.end(), mus[q].begin(), 0.0));
  }
  // Same seed, same pairs.
  ad::Tape t2;
  const auto again = loss::ipad_loss(old, t2.constant(neu), nodes, buffer, 10, 3, true);
  CHECK(again.kept.size() == r.kept.size());
  CHECK(again.loss.item() == r.loss.item());
  CHECK(r.loss.item() >= 0.0);
}

TEST_CASE("feature distillation baseline") {
  Rng rng(3);
  const Matrix old = random_matrix(5, 4, rng);
  Matrix shifted = old;
  for (std::size_t i = 0; i < 5; ++i) shifted(i, 0) += 1.0;
  const std::vector<std::size_t> nodes{0, 1, 2, 3, 4};
  ad::Tape t;
  CHECK(loss::fd_baseline_loss(old, t.constant(old), nodes).item() == 0.0);
  CHECK(loss::fd_baseline_loss(old, t.constant(shifted), nodes).item() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cross-entropy: uniform logits give ln C and shifts do not matter") {
  const std::vector<std::size_t> targets{0, 3, 2};
  ad::Tape t;
  CHECK(loss::cross_entropy(t.constant(Matrix(3, 5, 0.7)), targets).item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(3, 5, rng, -5, 5);
    Matrix b = a;
    for (std::size_t j = 0; j < 5; ++j) b(trial % 3, j) += 37.5;
    CHECK(std::abs(loss::cross_entropy(t.constant(a), targets).item() -
                   loss::cross_entropy(t.constant(b), targets).item()) < 1e-10);
  }
}

TEST_CASE("pcl is unchanged by a joint rotation of embeddings and prototypes") {
  Rng rng(8);
  const Matrix emb = random_matrix(6, 2, rng);
  const std::vector<graph::ClassId> labels{0, 1, 0, 1, 0, 1};
  const std::vector<std::size_t> anchors{0, 1, 2, 3, 4, 5};
  const std::vector<double> m0 = proto::unit(std::vector<double>{1, 2}), m1 = proto::unit(std::vector<double>{-2, 1});
  auto rot = [](std::vector<double> v, double a) {
    return std::vector<double>{std::cos(a) * v[0] - std::sin(a) * v[1], std::sin(a) * v[0] + std::cos(a) * v[1]};
  };
  Matrix emb_r = emb;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto r = rot({emb(i, 0), emb(i, 1)}, 0.9);
    emb_r(i, 0) = r[0];
    emb_r(i, 1) = r[1];
  }
  const proto::MemoryBuffer empty;
  const double a = eval_loss(emb, [&](ad::Var e) {
    return loss::pcl_loss(e, labels, anchors, {proto_of(0, m0), proto_of(1, m1)}, empty, 0.07, true);
  });
  const double b = eval_loss(emb_r, [&](ad::Var e) {
    return loss::pcl_loss(e, labels, anchors, {proto_of(0, rot(m0, 0.9)), proto_of(1, rot(m1, 0.9))}, empty, 0.07,
                          true);
  });
  CHECK(std::abs(a - b) < 1e-10);
}

TEST_CASE("prototype replay loss: uniform head and no stored classes") {
  Rng rng(3);
  const Matrix emb = random_matrix(4, 3, rng);
  const std::vector<graph::ClassId> labels{0, 1, 2, 0};
  const std::vector<std::size_t> anchors{0, 1, 2, 3};
  nn::LinearClassifier head(3, true);
  head.grow({0, 1, 2}, 1);
  head.weight.value = Matrix(3, 3);
  ad::Tape t;
  CHECK(loss::pr_baseline_loss(t.constant(emb), labels, anchors, head, proto::MemoryBuffer(), 10, 0, true).item() ==
        doctest::Approx(std::log(3.0)).epsilon(1e-14));

  head.weight.value = random_matrix(3, 3, rng);
  const std::vector<std::size_t> cols{0, 1, 2, 0};
  const double with_pr =
      loss::pr_baseline_loss(t.constant(emb), labels, anchors, head, proto::MemoryBuffer(), 10, 0, true).item();
  const double ce = loss::cross_entropy(t.constant(head.logits(emb)), cols).item();
  CHECK(with_pr == doctest::Approx(ce).epsilon(1e-14));
}

TEST_CASE("prototype replay loss adds a replay term when classes are stored") {
  Rng rng(3);
  const Matrix emb = random_matrix(2, 3, rng);
  const std::vector<graph::ClassId> labels{1, 1};
  const std::vector<std::size_t> anchors{0, 1};
  nn::LinearClassifier head(3, true);
  head.grow({0, 1}, 1);
  proto::MemoryBuffer buffer;
  ClassPrototype p = proto_of(0, {1, 0, 0});
  p.diag_variance = {0.1, 0.1, 0.1};
  buffer.insert(p);
  ad::Tape t;
  const double base = loss::pr_baseline_loss(t.constant(emb), labels, anchors, head, proto::MemoryBuffer(), 5, 2, true).item();
  const double full = loss::pr_baseline_loss(t.constant(emb), labels, anchors, head, buffer, 5, 2, true).item();
  const Matrix replay = loss::draw_replay(buffer, 5, 2, true);
  const std::vector<std::size_t> zeros(5, 0);
  const double replay_ce = loss::cross_entropy(t.constant(head.logits(replay)), zeros).item();
  CHECK(full == doctest::Approx(base + replay_ce).epsilon(1e-13));
}

TEST_CASE("total objective arithmetic and the base-task rule") {
  ad::Tape t;
  const auto pcl = t.constant(Matrix(1, 1, 1.0));
  const auto ipad = t.constant(Matrix(1, 1, 0.5));
  const auto o = loss::total_loss(pcl, ipad, 0.6, false);
  CHECK(o.total.item() == doctest::Approx(1.3).epsilon(1e-15));
  CHECK(o.breakdown.total == o.breakdown.pcl_term + 0.6 * o.breakdown.ipad_term);
  CHECK(loss::total_loss(pcl, ipad, 0.0, false).total.item() == 1.0);
  CHECK(loss::total_loss(pcl, ipad, 0.6, true).total.item() == 1.0);
  CHECK(loss::total_loss(pcl, ad::Var(), 0.6, true).total.item() == 1.0);
  CHECK_THROWS_AS(loss::total_loss(pcl, ipad, -0.1, false), std::invalid_argument);
}
