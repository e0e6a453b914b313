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

#include <cstdint>
#include <span>
#include <vector>

#include "ipal/autodiff.hpp"
#include "ipal/nn.hpp"
#include "ipal/prototype_memory.hpp"
#include "ipal/random.hpp"

// Training objectives. Embedding arguments are the full task embedding
// matrix (one row per task node); `anchors` / `nodes` select the training
// rows that participate. Prototypes are constants: no gradient flows into
// them. With `normalize` set, every prototype and replay draw is scaled to
// unit length before it enters a dot product.

namespace ipal::loss {

using graph::ClassId;

struct LossBreakdown {
  double pcl_term = 0.0;
  double ipad_term = 0.0;
  double total = 0.0;
  std::size_t num_hard_negatives_used = 0;
  std::size_t num_mixup_kept = 0;
  std::size_t num_mixup_filtered = 0;
  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct HardExample {
  std::size_t node;
  ClassId class_id;
  double entropy;
};

/// Top-K highest-entropy training nodes per current class, grouped by class
/// in the order of `current_classes`, highest entropy first within a class.
struct HardExampleSet {
  std::vector<HardExample> examples;
  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

/// Prototype rows used by the contrastive losses: current-task (online)
/// classes first, then stored (offline) classes, each ascending by class id.
struct PrototypeTable {
  Matrix means;
  std::vector<ClassId> classes;
  std::size_t num_online = 0;

  static PrototypeTable build(const std::vector<proto::ClassPrototype>& online,
                              const proto::MemoryBuffer& offline, bool normalize);
  std::size_t row_of(ClassId c) const;  // throws std::out_of_range
};

/// Shannon entropy (natural log) of softmax(f·μ) for each row of `embeddings`
/// listed in `nodes`, against every row of `prototypes`.
std::vector<double> prototype_entropy(const Matrix& embeddings, std::span<const std::size_t> nodes,
                                      const Matrix& prototypes);

HardExampleSet select_hard_examples(const Matrix& embeddings, std::span<const ClassId> labels,
                                    std::span<const std::size_t> nodes, const Matrix& all_prototypes,
                                    std::span<const ClassId> current_classes, std::size_t k);

/// Prototype contrastive loss: mean over anchors of
///   −log softmax(f·μ/τ)[own class]
/// over all online and offline prototypes.
ad::Var pcl_loss(ad::Var embeddings, std::span<const ClassId> labels, std::span<const std::size_t> anchors,
                 const std::vector<proto::ClassPrototype>& online, const proto::MemoryBuffer& offline,
                 double tau, bool normalize);

/// Replay draws for every stored class, `k` per class, stacked in ascending
/// class order. Seeds are derived per class from `seed`.
Matrix draw_replay(const proto::MemoryBuffer& buffer, std::size_t k, std::uint64_t seed, bool normalize,
                   std::vector<ClassId>* row_classes = nullptr);

/// pcl_loss with two extra groups of negatives in each anchor's denominator:
/// hard examples of the other current classes (live embeddings, gradients
/// flow through them) and `replay_k` Gaussian draws per stored class
/// (constants).
ad::Var pcl_dbp_loss(ad::Var embeddings, std::span<const ClassId> labels, std::span<const std::size_t> anchors,
                     const std::vector<proto::ClassPrototype>& online, const proto::MemoryBuffer& offline,
                     const HardExampleSet& hard, std::size_t replay_k, double tau, std::uint64_t seed,
                     bool normalize);

struct MixupPair {
  std::size_t node;
  ClassId class_id;
  double lambda;
};

struct IpadResult {
  ad::Var loss;
  std::vector<MixupPair> kept;
  std::size_t filtered = 0;
};

/// Draws λ ~ Beta(9, 21), redrawing until λ <= 0.4.
double draw_mixup_lambda(Rng& rng);

/// Instance-prototype affinity distillation. A seeded subset of `nodes`
/// (min(subset_size, |nodes|) of them) is mixed with every stored prototype,
///   f̃ = λ f + (1 − λ) μ_m,
/// pairs whose old mixed feature does not score highest against its own
/// prototype are dropped, and the loss is the mean over kept pairs of
/// |f̃_new·μ_m − f̃_old·μ_m|. Zero when nothing is stored or nothing is kept.
IpadResult ipad_loss(const Matrix& old_embeddings, ad::Var new_embeddings, std::span<const std::size_t> nodes,
                     const proto::MemoryBuffer& buffer, std::size_t subset_size, std::uint64_t seed,
                     bool normalize);

/// Mean over `nodes` of ‖f_new − f_old‖₂.
ad::Var fd_baseline_loss(const Matrix& old_embeddings, ad::Var new_embeddings, std::span<const std::size_t> nodes);

/// Mean cross-entropy of `logits` rows against `targets` (column indices).
ad::Var cross_entropy(ad::Var logits, std::span<const std::size_t> targets);

/// Prototype replay with a linear head: cross-entropy on the anchors plus
/// cross-entropy on `replay_k` draws per stored class (omitted when the
/// buffer is empty or replay_k is 0).
ad::Var pr_baseline_loss(ad::Var embeddings, std::span<const ClassId> labels, std::span<const std::size_t> anchors,
                         nn::LinearClassifier& classifier, const proto::MemoryBuffer& buffer,
                         std::size_t replay_k, std::uint64_t seed, bool normalize);

struct Objective {
  ad::Var total;
  LossBreakdown breakdown;
};

/// total = contrastive + γ·distill; γ is forced to 0 on the base task, in
/// which case `distill` may be an invalid Var.
Objective total_loss(ad::Var contrastive, ad::Var distill, double gamma, bool base_task);

}  // namespace ipal::loss
