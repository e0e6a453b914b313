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
#include <vector>

#include "ipal/autodiff.hpp"
#include "ipal/graph_store.hpp"

namespace ipal::nn {

/// D̃^{-1/2}(A + I)D̃^{-1/2} with D̃ the degree matrix of A + I.
/// Requires a symmetric adjacency without self-loops.
Csr normalize_adjacency(const Csr& adjacency);

/// A task graph prepared for repeated encoding: the normalized adjacency and
/// the constant first propagation Â·X.
struct PreparedGraph {
  Csr a_hat;
  Matrix propagated_features;

  static PreparedGraph from(const graph::TaskGraph& task);
  static PreparedGraph from(const Csr& adjacency, const Matrix& features);
  std::size_t num_nodes() const { return a_hat.n; }
};

/// Two-layer GCN: Â·ReLU(Â·X·W1)·W2, optionally followed by row-wise L2
/// normalization. No biases.
class GcnEncoder {
 public:
  static constexpr std::size_t kHidden = 128;

  GcnEncoder() = default;
  GcnEncoder(std::size_t feature_dim, std::uint64_t seed, bool l2_normalize_output = true);

  /// Records the forward pass on `tape` with W1/W2 as trainable leaves.
  ad::Var encode(ad::Tape& tape, const PreparedGraph& graph);
  /// Forward pass with the weights held constant.
  Matrix embed(const PreparedGraph& graph) const;

  std::size_t feature_dim() const { return w1.value.rows; }
  std::vector<ad::Parameter*> parameters() { return {&w1, &w2}; }
  std::vector<const ad::Parameter*> parameters() const { return {&w1, &w2}; }

  ad::Parameter w1;
  ad::Parameter w2;
  bool l2_normalize_output = true;
};

/// Shared forward definition used by both encode() and embed().
ad::Var gcn_forward(ad::Var w1, ad::Var w2, const PreparedGraph& graph, bool l2_normalize_output);

/// Linear head over the seen classes. Column j scores `classes[j]`; the
/// column set only ever grows.
class LinearClassifier {
 public:
  LinearClassifier() = default;
  explicit LinearClassifier(std::size_t in_dim, bool use_bias = true);

  /// Appends freshly initialized columns for `new_classes`.
  void grow(const std::vector<graph::ClassId>& new_classes, std::uint64_t seed);
  ad::Var logits(ad::Tape& tape, ad::Var features);
  Matrix logits(const Matrix& features) const;

  std::size_t column_of(graph::ClassId c) const;
  const std::vector<graph::ClassId>& classes() const { return classes_; }
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  ad::Parameter weight;  // in_dim × num_classes
  ad::Parameter bias;    // 1 × num_classes
  bool use_bias = true;

 private:
  std::vector<graph::ClassId> classes_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Matrix m;
  Matrix v;
  std::uint64_t step = 0;
};

/// One Adam update of `p` from `p.grad` (a missing gradient counts as zero).
void adam_step(ad::Parameter& p, AdamState& state, double lr, const AdamConfig& cfg = {});

class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, double lr, AdamConfig cfg = {});
  void zero_grad();
  void step();
  double lr() const { return lr_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<AdamState> states_;
  double lr_;
  AdamConfig cfg_;
};

/// Glorot-uniform fill.
Matrix glorot(std::size_t rows, std::size_t cols, std::uint64_t seed);

// Parameter checkpoints. Text with a versioned header; every value is the
// 16-hex-digit IEEE-754 bit pattern, so files round-trip bitwise and their
// size depends only on parameter shapes and names.
void write_parameters(std::ostream& out, const std::vector<const ad::Parameter*>& params);
std::vector<ad::Parameter> read_parameters(std::istream& in);

/// Fixed-width bit-exact encoding of a double.
std::string encode_double(double v);
double decode_double(const std::string& hex);

}  // namespace ipal::nn
