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

#include "ipal/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ipal/kernels.hpp"

namespace ipal::loss {

namespace {

void copy_row(std::span<const double> src, std::span<double> dst) { std::copy(src.begin(), src.end(), dst.begin()); }

// Shared body of pcl_loss and pcl_dbp_loss. With no hard examples and no
// replay rows the computation is exactly the plain contrastive loss.
ad::Var contrastive(ad::Var embeddings, std::span<const ClassId> labels, std::span<const std::size_t> anchors,
                    const PrototypeTable& table, const HardExampleSet& hard, const Matrix& replay, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive loss: tau must be positive");
  if (anchors.empty()) throw std::invalid_argument("contrastive loss: no anchors");
  if (labels.size() != embeddings.rows()) throw std::invalid_argument("contrastive loss: one label per row required");
  ad::Tape& t = embeddings.tape();

  std::vector<std::size_t> positive(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const ClassId c = labels[anchors[i]];
    auto it = std::find(table.classes.begin(), table.classes.begin() + table.num_online, c);
    if (it == table.classes.begin() + table.num_online)
      throw std::invalid_argument("contrastive loss: no online prototype for class " + std::to_string(c));
    positive[i] = static_cast<std::size_t>(it - table.classes.begin());
  }

  std::vector<ad::Var> keys{t.constant(table.means)};
  std::vector<std::size_t> hard_rows;
  for (const auto& h : hard.examples) hard_rows.push_back(h.node);
  if (!hard_rows.empty()) keys.push_back(ad::gather_rows(embeddings, hard_rows));
  if (!replay.empty()) keys.push_back(t.constant(replay));
  ad::Var key_matrix = keys.size() == 1 ? keys.front() : ad::concat_rows(keys);

  ad::Var anchor_rows = ad::gather_rows(embeddings, anchors);
  ad::Var logits = ad::scale(ad::matmul_nt(anchor_rows, key_matrix), 1.0 / tau);

  ad::Var lse;
  if (hard_rows.empty()) {
    lse = ad::row_logsumexp(logits);
  } else {
    // A hard example only repels anchors of other classes.
    ad::RowMask mask(anchors.size(), key_matrix.rows());
    const std::size_t offset = table.means.rows;
    for (std::size_t i = 0; i < anchors.size(); ++i)
      for (std::size_t h = 0; h < hard.examples.size(); ++h)
        if (hard.examples[h].class_id == labels[anchors[i]]) mask.drop(i, offset + h);
    lse = ad::row_logsumexp(logits, &mask);
  }
  return ad::mean(ad::sub(lse, ad::pick(logits, positive)));
}

}  // namespace

PrototypeTable PrototypeTable::build(const std::vector<proto::ClassPrototype>& online,
                                     const proto::MemoryBuffer& offline, bool normalize) {
  std::vector<const proto::ClassPrototype*> on;
  for (const auto& p : online) on.push_back(&p);
  std::sort(on.begin(), on.end(), [](auto* a, auto* b) { return a->class_id < b->class_id; });

  PrototypeTable table;
  const std::size_t d = !on.empty() ? on.front()->mean.size()
                        : offline.empty() ? 0
                                          : offline.entries().begin()->second.mean.size();
  table.means = Matrix(on.size() + offline.size(), d);
  std::size_t r = 0;
  auto put = [&](const proto::ClassPrototype& p) {
    if (p.mean.size() != d) throw std::invalid_argument("PrototypeTable: prototype dimensions differ");
    copy_row(normalize ? proto::unit(p.mean) : p.mean, table.means.row(r++));
    table.classes.push_back(p.class_id);
  };
  for (const auto* p : on) {
    if (offline.contains(p->class_id))
      throw std::invalid_argument("PrototypeTable: class " + std::to_string(p->class_id) +
                                  " is both online and stored");
    put(*p);
  }
  table.num_online = on.size();
  for (const auto& [_, p] : offline.entries()) put(p);
  return table;
}

std::size_t PrototypeTable::row_of(ClassId c) const {
  auto it = std::find(classes.begin(), classes.end(), c);
  if (it == classes.end()) throw std::out_of_range("PrototypeTable: unknown class " + std::to_string(c));
  return static_cast<std::size_t>(it - classes.begin());
}

std::vector<double> prototype_entropy(const Matrix& embeddings, std::span<const std::size_t> nodes,
                                      const Matrix& prototypes) {
  std::vector<double> out;
  out.reserve(nodes.size());
  std::vector<double> z(prototypes.rows);
  for (std::size_t x : nodes) {
    auto f = embeddings.row(x);
    for (std::size_t k = 0; k < prototypes.rows; ++k) {
      auto mu = prototypes.row(k);
      z[k] = std::inner_product(f.begin(), f.end(), mu.begin(), 0.0);
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (double& v : z) total += v = std::exp(v - mx);
    double h = 0.0;
    for (double v : z) {
      const double p = v / total;
      if (p > 0.0) h -= p * std::log(p);
    }
    out.push_back(h);
  }
  return out;
}

HardExampleSet select_hard_examples(const Matrix& embeddings, std::span<const ClassId> labels,
                                    std::span<const std::size_t> nodes, const Matrix& all_prototypes,
                                    std::span<const ClassId> current_classes, std::size_t k) {
  HardExampleSet out;
  if (k == 0 || all_prototypes.rows == 0) return out;
  const auto entropy = prototype_entropy(embeddings, nodes, all_prototypes);
  for (ClassId c : current_classes) {
    std::vector<HardExample> members;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (labels[nodes[i]] == c) members.push_back({nodes[i], c, entropy[i]});
    std::sort(members.begin(), members.end(), [](const HardExample& a, const HardExample& b) {
      return a.entropy != b.entropy ? a.entropy > b.entropy : a.node < b.node;
    });
    members.resize(std::min(k, members.size()));
    out.examples.insert(out.examples.end(), members.begin(), members.end());
  }
  return out;
}

ad::Var pcl_loss(ad::Var embeddings, std::span<const ClassId> labels, std::span<const std::size_t> anchors,
                 const std::vector<proto::ClassPrototype>& online, const proto::MemoryBuffer& offline,
                 double tau, bool normalize) {
  return contrastive(embeddings, labels, anchors, PrototypeTable::build(online, offline, normalize), {}, {}, tau);
}

Matrix draw_replay(const proto::MemoryBuffer& buffer, std::size_t k, std::uint64_t seed, bool normalize,
                   std::vector<ClassId>* row_classes) {
  if (k == 0 || buffer.empty()) return {};
  const std::size_t d = buffer.entries().begin()->second.mean.size();
  Matrix out(buffer.size() * k, d);
  std::size_t r = 0;
  for (const auto& [c, p] : buffer.entries()) {
    const Matrix draws = proto::sample_replay(p, k, derive_seed(seed, {static_cast<std::uint64_t>(c)}), normalize);
    std::copy(draws.data.begin(), draws.data.end(), out.data.begin() + r * d);
    r += k;
    if (row_classes) row_classes->insert(row_classes->end(), k, c);
  }
  return out;
}

ad::Var pcl_dbp_loss(ad::Var embeddings, std::span<const ClassId> labels, std::span<const std::size_t> anchors,
                     const std::vector<proto::ClassPrototype>& online, const proto::MemoryBuffer& offline,
                     const HardExampleSet& hard, std::size_t replay_k, double tau, std::uint64_t seed,
                     bool normalize) {
  const Matrix replay = draw_replay(offline, replay_k, seed, normalize);
  return contrastive(embeddings, labels, anchors, PrototypeTable::build(online, offline, normalize), hard, replay,
                     tau);
}

double draw_mixup_lambda(Rng& rng) {
  for (;;) {
    const double lambda = sample_beta(rng, 9.0, 21.0);
    if (lambda <= 0.4) return lambda;
  }
}

IpadResult ipad_loss(const Matrix& old_embeddings, ad::Var new_embeddings, std::span<const std::size_t> nodes,
                     const proto::MemoryBuffer& buffer, std::size_t subset_size, std::uint64_t seed,
                     bool normalize) {
  ad::Tape& t = new_embeddings.tape();
  if (!old_embeddings.same_shape(new_embeddings.value()))
    throw std::invalid_argument("ipad_loss: old and new embeddings must be row-aligned");
  IpadResult result;
  if (buffer.empty() || nodes.empty() || subset_size == 0) {
    result.loss = t.constant(Matrix(1, 1));
    return result;
  }

  Rng rng(seed);
  std::vector<std::size_t> subset(nodes.begin(), nodes.end());
  std::shuffle(subset.begin(), subset.end(), rng);
  subset.resize(std::min(subset_size, subset.size()));

  const auto classes = buffer.classes();
  const std::size_t d = old_embeddings.cols;
  Matrix mu(classes.size(), d);
  for (std::size_t m = 0; m < classes.size(); ++m) {
    const auto& mean = buffer.at(classes[m]).mean;
    copy_row(normalize ? proto::unit(mean) : mean, mu.row(m));
  }

  std::vector<double> mixed(d);
  for (std::size_t x : subset) {
    auto f = old_embeddings.row(x);
    for (std::size_t m = 0; m < classes.size(); ++m) {
      const double lambda = draw_mixup_lambda(rng);
      for (std::size_t j = 0; j < d; ++j) mixed[j] = lambda * f[j] + (1.0 - lambda) * mu(m, j);
      // Keep the pair only if its own prototype wins (first maximum on ties).
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < classes.size(); ++q) {
        auto mq = mu.row(q);
        const double s = std::inner_product(mixed.begin(), mixed.end(), mq.begin(), 0.0);
        if (s > best_score) {
          best_score = s;
          best = q;
        }
      }
      if (best == m) {
        result.kept.push_back({x, classes[m], lambda});
      } else {
        ++result.filtered;
      }
    }
  }
  if (result.kept.empty()) {
    result.loss = t.constant(Matrix(1, 1));
    return result;
  }

  const std::size_t n = result.kept.size();
  std::vector<std::size_t> rows(n);
  Matrix lambdas(n, d), offsets(n, d), protos(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pair = result.kept[i];
    rows[i] = pair.node;
    const std::size_t m = static_cast<std::size_t>(std::find(classes.begin(), classes.end(), pair.class_id) - classes.begin());
    for (std::size_t j = 0; j < d; ++j) {
      lambdas(i, j) = pair.lambda;
      offsets(i, j) = (1.0 - pair.lambda) * mu(m, j);
      protos(i, j) = mu(m, j);
    }
  }
  // Old and new sides go through the same ops so identical encoders give an
  // exactly zero loss.
  ad::Var lam = t.constant(std::move(lambdas));
  ad::Var off = t.constant(std::move(offsets));
  ad::Var pro = t.constant(std::move(protos));
  auto affinity = [&](ad::Var feats) {
    return ad::row_dot(ad::add(ad::mul(lam, ad::gather_rows(feats, rows)), off), pro);
  };
  ad::Var old_aff = affinity(t.constant(old_embeddings));
  ad::Var new_aff = affinity(new_embeddings);
  result.loss = ad::mean(ad::abs(ad::sub(new_aff, old_aff)));
  return result;
}

ad::Var fd_baseline_loss(const Matrix& old_embeddings, ad::Var new_embeddings, std::span<const std::size_t> nodes) {
  if (!old_embeddings.same_shape(new_embeddings.value()))
    throw std::invalid_argument("fd_baseline_loss: old and new embeddings must be row-aligned");
  if (nodes.empty()) throw std::invalid_argument("fd_baseline_loss: no nodes");
  ad::Tape& t = new_embeddings.tape();
  ad::Var old_rows = ad::gather_rows(t.constant(old_embeddings), nodes);
  ad::Var new_rows = ad::gather_rows(new_embeddings, nodes);
  return ad::mean(ad::row_norm(ad::sub(new_rows, old_rows)));
}

ad::Var cross_entropy(ad::Var logits, std::span<const std::size_t> targets) {
  return ad::mean(ad::sub(ad::row_logsumexp(logits), ad::pick(logits, targets)));
}

ad::Var pr_baseline_loss(ad::Var embeddings, std::span<const ClassId> labels, std::span<const std::size_t> anchors,
                         nn::LinearClassifier& classifier, const proto::MemoryBuffer& buffer,
                         std::size_t replay_k, std::uint64_t seed, bool normalize) {
  if (anchors.empty()) throw std::invalid_argument("pr_baseline_loss: no anchors");
  ad::Tape& t = embeddings.tape();
  std::vector<std::size_t> targets(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) targets[i] = classifier.column_of(labels[anchors[i]]);
  ad::Var current = cross_entropy(classifier.logits(t, ad::gather_rows(embeddings, anchors)), targets);

  std::vector<ClassId> replay_classes;
  Matrix replay = draw_replay(buffer, replay_k, seed, normalize, &replay_classes);
  if (replay.empty()) return current;
  std::vector<std::size_t> replay_targets(replay_classes.size());
  for (std::size_t i = 0; i < replay_classes.size(); ++i) replay_targets[i] = classifier.column_of(replay_classes[i]);
  ad::Var replayed = cross_entropy(classifier.logits(t, t.constant(std::move(replay))), replay_targets);
  return ad::add(current, replayed);
}

Objective total_loss(ad::Var contrastive_term, ad::Var distill, double gamma, bool base_task) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("total_loss: gamma must be non-negative");
  Objective out;
  out.breakdown.pcl_term = contrastive_term.item();
  if (base_task || gamma == 0.0 || !distill.valid()) {
    out.total = contrastive_term;
    out.breakdown.ipad_term = distill.valid() ? distill.item() : 0.0;
    out.breakdown.total = out.breakdown.pcl_term;
    return out;
  }
  out.breakdown.ipad_term = distill.item();
  out.total = ad::add(contrastive_term, ad::scale(distill, gamma));
  out.breakdown.total = out.total.item();
  return out;
}

}  // namespace ipal::loss
