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
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ipal/graph_store.hpp"
#include "ipal/matrix.hpp"

namespace ipal::proto {

using graph::ClassId;

/// Per-class diagonal Gaussian over embeddings.
struct ClassPrototype {
  ClassId class_id = 0;
  std::vector<double> mean;
  std::vector<double> diag_variance;
  std::size_t source_task = 0;
  double rank_mass = 0.0;  // Σ of the node weights that built this prototype

  friend bool operator==(const ClassPrototype&, const ClassPrototype&) = default;
};

/// The only state carried across tasks: one prototype per seen class.
/// Never holds per-node data.
class MemoryBuffer {
 public:
  /// Throws std::invalid_argument if the class is already stored.
  void insert(ClassPrototype p);
  bool contains(ClassId c) const { return prototypes_.count(c) != 0; }
  const ClassPrototype& at(ClassId c) const { return prototypes_.at(c); }
  ClassPrototype& at(ClassId c) { return prototypes_.at(c); }
  std::size_t size() const { return prototypes_.size(); }
  bool empty() const { return prototypes_.empty(); }
  /// Stored class ids, ascending.
  std::vector<ClassId> classes() const;
  const std::map<ClassId, ClassPrototype>& entries() const { return prototypes_; }

  friend bool operator==(const MemoryBuffer&, const MemoryBuffer&) = default;

 private:
  std::map<ClassId, ClassPrototype> prototypes_;
};

/// Scales a vector to unit L2 norm; zero vectors are returned unchanged.
std::vector<double> unit(std::span<const double> v);

/// Weighted class Gaussians over the rows `nodes` of `embeddings`:
///   μ_k = Σ w_x f_x / Σ w_x,   σ²_k = Σ w_x (f_x − μ_k)² / Σ w_x
/// over nodes labelled k. With `normalize_mean`, μ_k is rescaled to unit
/// norm after σ² has been computed around the raw weighted mean.
/// Throws std::invalid_argument if a class has no node among `nodes`.
std::vector<ClassPrototype> weighted_prototypes(const Matrix& embeddings, std::span<const ClassId> labels,
                                                std::span<const std::size_t> nodes,
                                                std::span<const double> weights,
                                                std::span<const ClassId> class_set, std::size_t source_task,
                                                bool normalize_mean);

/// Topology-integrated prototypes: weights are the PageRank scores.
std::vector<ClassPrototype> compute_tigp(const Matrix& embeddings, std::span<const ClassId> labels,
                                         std::span<const std::size_t> nodes, std::span<const double> pagerank,
                                         std::span<const ClassId> class_set, std::size_t source_task = 0,
                                         bool normalize_mean = false);

/// Plain class means (all weights 1).
std::vector<ClassPrototype> compute_mean_prototypes(const Matrix& embeddings, std::span<const ClassId> labels,
                                                    std::span<const std::size_t> nodes,
                                                    std::span<const ClassId> class_set, std::size_t source_task = 0,
                                                    bool normalize_mean = false);

/// Per-epoch prototypes for the classes of the current task. Same weighting
/// as compute_tigp (pass an empty `pagerank` for plain means); the variance
/// is left empty.
std::vector<ClassPrototype> update_online_prototypes(const Matrix& embeddings, std::span<const ClassId> labels,
                                                     std::span<const std::size_t> nodes,
                                                     std::span<const double> pagerank,
                                                     std::span<const ClassId> current_classes);

/// `k` draws from N(μ, diag σ²), one per row; each row re-normalized to unit
/// length when `normalize` is set.
Matrix sample_replay(const ClassPrototype& prototype, std::size_t k, std::uint64_t seed, bool normalize);

struct CompensationReport {
  std::vector<ClassId> skipped;  // classes whose weight denominator vanished
  std::map<ClassId, std::vector<double>> weights;  // w(x, μ_m) per node, for audit
};

/// Shifts each stored mean by β·Σ_x w(x, μ_m)·(f_new(x) − f_old(x)) with
///   w(x, μ_m) = (f_old(x)·μ_m) / Σ_x' (f_old(x')·μ_m).
/// Classes whose denominator has magnitude below 1e-8 are left alone and
/// listed in the report. Means are re-normalized when `normalize_mean`.
CompensationReport compensate_drift(MemoryBuffer& buffer, const Matrix& old_embeddings,
                                    const Matrix& new_embeddings, double beta, bool normalize_mean);

// Text checkpoint: header line, then per class one record line
// "class_id source_task rank_mass dim" followed by a mean line and a
// variance line of fixed-width bit patterns.
void write_buffer(std::ostream& out, const MemoryBuffer& buffer);
MemoryBuffer read_buffer(std::istream& in);

}  // namespace ipal::proto
