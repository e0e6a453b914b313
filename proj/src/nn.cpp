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

#include "ipal/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ipal/kernels.hpp"
#include "ipal/random.hpp"

namespace ipal::nn {

Csr normalize_adjacency(const Csr& adjacency) {
  const std::size_t n = adjacency.n;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(adjacency.nnz() + n);
  for (std::size_t i = 0; i < n; ++i) {
    pairs.emplace_back(i, i);
    for (std::size_t j : adjacency.neighbors(i)) {
      if (j == i) throw std::invalid_argument("normalize_adjacency: self-loop in input");
      pairs.emplace_back(i, j);
    }
  }
  Csr out = Csr::from_pairs(n, pairs);
  // One rounding per entry: 1/sqrt(d_i d_j) rather than a product of two
  // rounded factors.
  out.values.resize(out.nnz());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = out.row_ptr[i]; k < out.row_ptr[i + 1]; ++k)
      out.values[k] =
          1.0 / std::sqrt(static_cast<double>(out.degree(i)) * static_cast<double>(out.degree(out.col[k])));
  return out;
}

PreparedGraph PreparedGraph::from(const Csr& adjacency, const Matrix& features) {
  if (adjacency.n != features.rows) throw std::invalid_argument("PreparedGraph: adjacency/features size mismatch");
  PreparedGraph g;
  g.a_hat = normalize_adjacency(adjacency);
  g.propagated_features = kernels::spmm(g.a_hat, features);
  return g;
}

PreparedGraph PreparedGraph::from(const graph::TaskGraph& task) {
  return from(task.adjacency, task.features);
}

Matrix glorot(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (double& v : m.data) v = u(rng);
  return m;
}

// ------------------------------------------------------------------ encoder

GcnEncoder::GcnEncoder(std::size_t feature_dim, std::uint64_t seed, bool l2_normalize)
    : l2_normalize_output(l2_normalize) {
  if (feature_dim == 0) throw std::invalid_argument("GcnEncoder: feature_dim must be positive");
  w1 = {"encoder.w1", glorot(feature_dim, kHidden, derive_seed(seed, {1})), {}};
  w2 = {"encoder.w2", glorot(kHidden, kHidden, derive_seed(seed, {2})), {}};
}

ad::Var gcn_forward(ad::Var w1, ad::Var w2, const PreparedGraph& graph, bool l2_normalize_output) {
  if (graph.propagated_features.cols != w1.rows())
    throw std::invalid_argument("gcn_forward: feature dimension does not match W1");
  ad::Tape& t = w1.tape();
  ad::Var ax = t.constant(graph.propagated_features);
  ad::Var h = ad::relu(ad::matmul(ax, w1));
  ad::Var z = ad::spmm(graph.a_hat, ad::matmul(h, w2));
  return l2_normalize_output ? ad::row_normalize(z) : z;
}

ad::Var GcnEncoder::encode(ad::Tape& tape, const PreparedGraph& graph) {
  return gcn_forward(tape.param(w1), tape.param(w2), graph, l2_normalize_output);
}

Matrix GcnEncoder::embed(const PreparedGraph& graph) const {
  ad::Tape tape;
  return gcn_forward(tape.constant(w1.value), tape.constant(w2.value), graph, l2_normalize_output).value();
}

// --------------------------------------------------------------- classifier

LinearClassifier::LinearClassifier(std::size_t in_dim, bool bias_on)
    : weight{"classifier.weight", Matrix(in_dim, 0), {}},
      bias{"classifier.bias", Matrix(1, 0), {}},
      use_bias(bias_on) {}

void LinearClassifier::grow(const std::vector<graph::ClassId>& new_classes, std::uint64_t seed) {
  for (graph::ClassId c : new_classes)
    if (std::find(classes_.begin(), classes_.end(), c) != classes_.end())
      throw std::invalid_argument("LinearClassifier::grow: class already present");
  const std::size_t in = weight.value.rows;
  const std::size_t old_cols = weight.value.cols;
  const std::size_t new_cols = old_cols + new_classes.size();
  const Matrix init = glorot(in, new_classes.size(), seed);
  Matrix w(in, new_cols);
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t j = 0; j < old_cols; ++j) w(i, j) = weight.value(i, j);
    for (std::size_t j = 0; j < new_classes.size(); ++j) w(i, old_cols + j) = init(i, j);
  }
  Matrix b(1, new_cols);
  for (std::size_t j = 0; j < old_cols; ++j) b(0, j) = bias.value(0, j);
  weight.value = std::move(w);
  bias.value = std::move(b);
  weight.zero_grad();
  bias.zero_grad();
  classes_.insert(classes_.end(), new_classes.begin(), new_classes.end());
}

ad::Var LinearClassifier::logits(ad::Tape& tape, ad::Var features) {
  ad::Var out = ad::matmul(features, tape.param(weight));
  return use_bias ? ad::add_row(out, tape.param(bias)) : out;
}

Matrix LinearClassifier::logits(const Matrix& features) const {
  Matrix out = kernels::gemm(features, weight.value);
  if (use_bias)
    for (std::size_t i = 0; i < out.rows; ++i)
      for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bias.value(0, j);
  return out;
}

std::size_t LinearClassifier::column_of(graph::ClassId c) const {
  auto it = std::find(classes_.begin(), classes_.end(), c);
  if (it == classes_.end()) throw std::out_of_range("LinearClassifier: unknown class " + std::to_string(c));
  return static_cast<std::size_t>(it - classes_.begin());
}

std::vector<ad::Parameter*> LinearClassifier::parameters() {
  if (use_bias) return {&weight, &bias};
  return {&weight};
}

std::vector<const ad::Parameter*> LinearClassifier::parameters() const {
  if (use_bias) return {&weight, &bias};
  return {&weight};
}

// --------------------------------------------------------------------- adam

void adam_step(ad::Parameter& p, AdamState& s, double lr, const AdamConfig& cfg) {
  if (s.m.empty()) {
    s.m = Matrix(p.value.rows, p.value.cols);
    s.v = Matrix(p.value.rows, p.value.cols);
  }
  if (!s.m.same_shape(p.value)) throw std::invalid_argument("adam_step: state shape differs from parameter " + p.name);
  if (p.grad.empty()) p.grad = Matrix(p.value.rows, p.value.cols);
  ++s.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < p.value.size(); ++k) {
    const double g = p.grad.data[k];
    s.m.data[k] = cfg.beta1 * s.m.data[k] + (1.0 - cfg.beta1) * g;
    s.v.data[k] = cfg.beta2 * s.v.data[k] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = s.m.data[k] / bc1;
    const double v_hat = s.v.data[k] / bc2;
    p.value.data[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

Adam::Adam(std::vector<ad::Parameter*> params, double lr, AdamConfig cfg)
    : params_(std::move(params)), states_(params_.size()), lr_(lr), cfg_(cfg) {}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i], lr_, cfg_);
}

// -------------------------------------------------------------- checkpoints

std::string encode_double(double v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

double decode_double(const std::string& hex) {
  if (hex.size() != 16) throw std::runtime_error("bad encoded value '" + hex + "'");
  std::size_t used = 0;
  const unsigned long long bits = std::stoull(hex, &used, 16);
  if (used != 16) throw std::runtime_error("bad encoded value '" + hex + "'");
  return std::bit_cast<double>(static_cast<std::uint64_t>(bits));
}

void write_parameters(std::ostream& out, const std::vector<const ad::Parameter*>& params) {
  out << "ipal-parameters 1\n" << params.size() << '\n';
  for (const auto* p : params) {
    out << p->name << ' ' << p->value.rows << ' ' << p->value.cols << '\n';
    for (std::size_t i = 0; i < p->value.rows; ++i) {
      for (std::size_t j = 0; j < p->value.cols; ++j) out << (j ? " " : "") << encode_double(p->value(i, j));
      out << '\n';
    }
  }
}

std::vector<ad::Parameter> read_parameters(std::istream& in) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != "ipal-parameters")
    throw std::runtime_error("read_parameters: not a parameter checkpoint");
  if (version != 1) throw std::runtime_error("read_parameters: unsupported version " + std::to_string(version));
  if (!(in >> count)) throw std::runtime_error("read_parameters: missing parameter count");
  std::vector<ad::Parameter> out(count);
  for (auto& p : out) {
    std::size_t rows = 0, cols = 0;
    if (!(in >> p.name >> rows >> cols)) throw std::runtime_error("read_parameters: truncated header");
    p.value = Matrix(rows, cols);
    std::string tok;
    for (double& v : p.value.data) {
      if (!(in >> tok)) throw std::runtime_error("read_parameters: truncated values for " + p.name);
      v = decode_double(tok);
    }
  }
  return out;
}

}  // namespace ipal::nn
