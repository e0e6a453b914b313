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

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ipal/matrix.hpp"

// Minimal tape-based reverse-mode differentiation over dense f64 matrices.
//
// A Tape is a Wengert list: every op appends a node holding its value and a
// closure that pushes the node's output gradient to its inputs. backward()
// walks the list once in reverse, so no topological sort is needed. Trainable
// weights live outside the tape as Parameters; Tape::param() records a leaf
// whose gradient is added into Parameter::grad when backward() finishes.
//
// Every op checks its output for NaN/Inf and throws std::domain_error rather
// than letting non-finite values propagate.

namespace ipal::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // empty until the first backward() that reaches it

  void zero_grad() { grad = Matrix(); }
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  /// Value of a 1×1 node.
  double item() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the node's own value and its accumulated output gradient.
  using Backward = std::function<void(Tape&, const Matrix& out, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);

  /// Appends an op node. `inputs` decide whether the node needs a gradient.
  Var record(const char* op, Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(const char* op, Matrix value, std::span<const Var> inputs, Backward backward);

  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }
  /// Gradient slot of `v`, zero-initialized on first access.
  Matrix& grad(const Var& v);

  /// Populates gradients of every parameter reachable from `loss`, then
  /// clears the tape. Throws std::invalid_argument unless `loss` is 1×1.
  void backward(const Var& loss);

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  friend class Var;
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };
  Var push(Node node);
  void check_owned(const Var& v) const;

  std::deque<Node> nodes_;  // deque keeps references stable across push_back
};

/// Row mask for row_logsumexp: entry (i, j) false drops column j from row i.
struct RowMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<unsigned char> keep;

  RowMask(std::size_t r, std::size_t c) : rows(r), cols(c), keep(r * c, 1) {}
  void drop(std::size_t i, std::size_t j) { keep[i * cols + j] = 0; }
  bool kept(std::size_t i, std::size_t j) const { return keep[i * cols + j] != 0; }
};

// Products.
Var matmul(Var a, Var b);     // A·B
Var matmul_nt(Var a, Var b);  // A·Bᵀ
/// S·X for a constant sparse S. `s` must outlive the tape's backward pass.
Var spmm(const Csr& s, Var x);

// Elementwise.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// Adds a 1×c row vector to every row of an n×c matrix.
Var add_row(Var m, Var row);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var abs(Var a);

// Row-wise.
/// Divides each row by its L2 norm. Zero rows pass through unchanged and
/// their gradient is the identity.
Var row_normalize(Var a);
Var row_softmax(Var a);
/// n×1 column of log Σ_j exp(a_ij), optionally restricted to kept columns.
/// Every row must keep at least one column.
Var row_logsumexp(Var a, const RowMask* mask = nullptr);
Var row_norm(Var a);                 // n×1, ‖a_i‖₂
Var row_dot(Var a, Var b);           // n×1, a_i·b_i
Var sq_dist_rows(Var a, Var b);      // n×1, ‖a_i − b_i‖²
/// n×1 column with a(i, cols[i]).
Var pick(Var a, std::span<const std::size_t> cols);

// Reductions and reshaping.
Var sum(Var a);
Var mean(Var a);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat_rows(std::span<const Var> parts);
Var concat_rows(std::initializer_list<Var> parts);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace ipal::ad
