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

#include "ipal/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ipal/kernels.hpp"

namespace ipal::ad {

namespace {

void require(bool ok, const char* op, const char* what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst.data[k] += src.data[k];
}

Tape& common_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands recorded on different tapes");
  return a.tape();
}

}  // namespace

const Matrix& Var::value() const { return tape_->nodes_[id_].value; }

double Var::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw std::invalid_argument("item() on a non-scalar");
  return v.data[0];
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size())
    throw std::invalid_argument("variable does not belong to this tape");
}

Var Tape::constant(Matrix value) {
  if (!all_finite(value)) throw std::domain_error("constant: non-finite value");
  return push(Node{std::move(value), {}, false, {}, nullptr});
}

Var Tape::param(Parameter& p) {
  if (!all_finite(p.value)) throw std::domain_error("param " + p.name + ": non-finite value");
  return push(Node{p.value, {}, true, {}, &p});
}

Var Tape::record(const char* op, Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(const char* op, Matrix value, std::span<const Var> inputs, Backward backward) {
  if (!all_finite(value)) throw std::domain_error(std::string(op) + ": non-finite result");
  bool needs = false;
  for (const Var& in : inputs) {
    check_owned(in);
    needs = needs || nodes_[in.id()].needs_grad;
  }
  return push(Node{std::move(value), {}, needs, needs ? std::move(backward) : Backward{}, nullptr});
}

Matrix& Tape::grad(const Var& v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

void Tape::backward(const Var& loss) {
  check_owned(loss);
  if (loss.value().size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (!nodes_[loss.id()].needs_grad) {
    clear();
    return;
  }
  grad(loss).data[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, n.value, n.grad);
    if (n.param) {
      if (n.param->grad.empty()) n.param->grad = Matrix(n.value.rows, n.value.cols);
      add_into(n.param->grad, n.grad);
    }
  }
  clear();
}

// ---------------------------------------------------------------- products

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require(a.cols() == b.rows(), "matmul", "inner dimensions differ");
  return t.record("matmul", kernels::gemm(a.value(), b.value()), {a, b},
                  [a, b](Tape& t, const Matrix&, const Matrix& g) {
                    if (t.needs_grad(a)) add_into(t.grad(a), kernels::gemm_nt(g, b.value()));
                    if (t.needs_grad(b)) add_into(t.grad(b), kernels::gemm_tn(a.value(), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require(a.cols() == b.cols(), "matmul_nt", "inner dimensions differ");
  return t.record("matmul_nt", kernels::gemm_nt(a.value(), b.value()), {a, b},
                  [a, b](Tape& t, const Matrix&, const Matrix& g) {
                    if (t.needs_grad(a)) add_into(t.grad(a), kernels::gemm(g, b.value()));
                    if (t.needs_grad(b)) add_into(t.grad(b), kernels::gemm_tn(g, a.value()));
                  });
}

Var spmm(const Csr& s, Var x) {
  require(s.n == x.rows(), "spmm", "sparse matrix and operand disagree");
  const Csr* sp = &s;
  return x.tape().record("spmm", kernels::spmm(s, x.value()), {x},
                         [sp, x](Tape& t, const Matrix&, const Matrix& g) {
                           add_into(t.grad(x), kernels::spmm(sp->transposed(), g));
                         });
}

// -------------------------------------------------------------- elementwise

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require(a.value().same_shape(b.value()), "add", "shape mismatch");
  Matrix out = a.value();
  add_into(out, b.value());
  return t.record("add", std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.needs_grad(a)) add_into(t.grad(a), g);
    if (t.needs_grad(b)) add_into(t.grad(b), g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require(a.value().same_shape(b.value()), "sub", "shape mismatch");
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= b.value().data[k];
  return t.record("sub", std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.needs_grad(a)) add_into(t.grad(a), g);
    if (t.needs_grad(b)) {
      Matrix& gb = t.grad(b);
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] -= g.data[k];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require(a.value().same_shape(b.value()), "mul", "shape mismatch");
  Matrix out = a.value();
  for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= b.value().data[k];
  return t.record("mul", std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    if (t.needs_grad(a)) {
      Matrix& ga = t.grad(a);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * b.value().data[k];
    }
    if (t.needs_grad(b)) {
      Matrix& gb = t.grad(b);
      for (std::size_t k = 0; k < g.size(); ++k) gb.data[k] += g.data[k] * a.value().data[k];
    }
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value();
  for (double& v : out.data) v *= s;
  return a.tape().record("scale", std::move(out), {a}, [a, s](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += s * g.data[k];
  });
}

Var add_row(Var m, Var row) {
  Tape& t = common_tape(m, row);
  require(row.rows() == 1 && row.cols() == m.cols(), "add_row", "row must be 1×cols");
  Matrix out = m.value();
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += row.value()(0, j);
  return t.record("add_row", std::move(out), {m, row},
                  [m, row](Tape& t, const Matrix&, const Matrix& g) {
                    if (t.needs_grad(m)) add_into(t.grad(m), g);
                    if (t.needs_grad(row)) {
                      Matrix& gr = t.grad(row);
                      for (std::size_t i = 0; i < g.rows; ++i)
                        for (std::size_t j = 0; j < g.cols; ++j) gr(0, j) += g(i, j);
                    }
                  });
}

Var relu(Var a) {
  Matrix out = a.value();
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return a.tape().record("relu", std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& ga = t.grad(a);
    const Matrix& x = a.value();
    for (std::size_t k = 0; k < g.size(); ++k)
      if (x.data[k] > 0.0) ga.data[k] += g.data[k];
  });
}

Var exp(Var a) {
  Matrix out = a.value();
  for (double& v : out.data) v = std::exp(v);
  return a.tape().record("exp", std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] * y.data[k];
  });
}

Var log(Var a) {
  for (double v : a.value().data)
    if (!(v > 0.0)) throw std::domain_error("log: non-positive argument");
  Matrix out = a.value();
  for (double& v : out.data) v = std::log(v);
  return a.tape().record("log", std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] / a.value().data[k];
  });
}

Var abs(Var a) {
  Matrix out = a.value();
  for (double& v : out.data) v = std::fabs(v);
  return a.tape().record("abs", std::move(out), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    Matrix& ga = t.grad(a);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double x = a.value().data[k];
      // Subgradient at 0 is taken as 0.
      if (x > 0.0) ga.data[k] += g.data[k];
      else if (x < 0.0) ga.data[k] -= g.data[k];
    }
  });
}

// ----------------------------------------------------------------- row-wise

Var row_normalize(Var a) {
  const Matrix& x = a.value();
  Matrix out = x;
  std::vector<double> norms(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    if (norms[i] > 0.0)
      for (double& v : out.row(i)) v /= norms[i];
  }
  return a.tape().record("row_normalize", std::move(out), {a},
                         [a, norms = std::move(norms)](Tape& t, const Matrix& y, const Matrix& g) {
                           Matrix& ga = t.grad(a);
                           for (std::size_t i = 0; i < g.rows; ++i) {
                             auto gi = g.row(i);
                             auto dst = ga.row(i);
                             if (norms[i] == 0.0) {
                               for (std::size_t j = 0; j < g.cols; ++j) dst[j] += gi[j];
                               continue;
                             }
                             auto yi = y.row(i);
                             double dot = 0.0;
                             for (std::size_t j = 0; j < g.cols; ++j) dot += yi[j] * gi[j];
                             for (std::size_t j = 0; j < g.cols; ++j)
                               dst[j] += (gi[j] - yi[j] * dot) / norms[i];
                           }
                         });
}

Var row_softmax(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto xi = x.row(i);
    const double mx = *std::max_element(xi.begin(), xi.end());
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) z += out(i, j) = std::exp(xi[j] - mx);
    for (std::size_t j = 0; j < x.cols; ++j) out(i, j) /= z;
  }
  return a.tape().record("row_softmax", std::move(out), {a},
                         [a](Tape& t, const Matrix& y, const Matrix& g) {
                           Matrix& ga = t.grad(a);
                           for (std::size_t i = 0; i < g.rows; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < g.cols; ++j) dot += g(i, j) * y(i, j);
                             for (std::size_t j = 0; j < g.cols; ++j)
                               ga(i, j) += y(i, j) * (g(i, j) - dot);
                           }
                         });
}

Var row_logsumexp(Var a, const RowMask* mask) {
  const Matrix& x = a.value();
  if (mask) require(mask->rows == x.rows && mask->cols == x.cols, "row_logsumexp", "mask shape mismatch");
  auto kept = [mask](std::size_t i, std::size_t j) { return !mask || mask->kept(i, j); };
  Matrix out(x.rows, 1);
  Matrix soft(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols; ++j)
      if (kept(i, j)) mx = std::max(mx, x(i, j));
    require(std::isfinite(mx), "row_logsumexp", "a row keeps no columns");
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j)
      if (kept(i, j)) z += soft(i, j) = std::exp(x(i, j) - mx);
    for (std::size_t j = 0; j < x.cols; ++j) soft(i, j) /= z;
    out(i, 0) = mx + std::log(z);
  }
  return a.tape().record("row_logsumexp", std::move(out), {a},
                         [a, soft = std::move(soft)](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix& ga = t.grad(a);
                           for (std::size_t i = 0; i < soft.rows; ++i)
                             for (std::size_t j = 0; j < soft.cols; ++j) ga(i, j) += g(i, 0) * soft(i, j);
                         });
}

Var row_norm(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows, 1);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    out(i, 0) = std::sqrt(s);
  }
  return a.tape().record("row_norm", std::move(out), {a}, [a](Tape& t, const Matrix& y, const Matrix& g) {
    Matrix& ga = t.grad(a);
    const Matrix& x = a.value();
    for (std::size_t i = 0; i < x.rows; ++i) {
      if (y(i, 0) == 0.0) continue;  // subgradient 0 at the origin
      const double s = g(i, 0) / y(i, 0);
      for (std::size_t j = 0; j < x.cols; ++j) ga(i, j) += s * x(i, j);
    }
  });
}

Var row_dot(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require(a.value().same_shape(b.value()), "row_dot", "shape mismatch");
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  Matrix out(x.rows, 1);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) s += x(i, j) * z(i, j);
    out(i, 0) = s;
  }
  return t.record("row_dot", std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    const Matrix& x = a.value();
    const Matrix& z = b.value();
    if (t.needs_grad(a)) {
      Matrix& ga = t.grad(a);
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) ga(i, j) += g(i, 0) * z(i, j);
    }
    if (t.needs_grad(b)) {
      Matrix& gb = t.grad(b);
      for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) gb(i, j) += g(i, 0) * x(i, j);
    }
  });
}

Var sq_dist_rows(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require(a.value().same_shape(b.value()), "sq_dist_rows", "shape mismatch");
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  Matrix out(x.rows, 1);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double d = x(i, j) - z(i, j);
      s += d * d;
    }
    out(i, 0) = s;
  }
  return t.record("sq_dist_rows", std::move(out), {a, b}, [a, b](Tape& t, const Matrix&, const Matrix& g) {
    const Matrix& x = a.value();
    const Matrix& z = b.value();
    const bool ga_on = t.needs_grad(a), gb_on = t.needs_grad(b);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t j = 0; j < x.cols; ++j) {
        const double d = 2.0 * g(i, 0) * (x(i, j) - z(i, j));
        if (ga_on) t.grad(a)(i, j) += d;
        if (gb_on) t.grad(b)(i, j) -= d;
      }
  });
}

Var pick(Var a, std::span<const std::size_t> cols) {
  const Matrix& x = a.value();
  require(cols.size() == x.rows, "pick", "need one column index per row");
  Matrix out(x.rows, 1);
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  for (std::size_t i = 0; i < x.rows; ++i) {
    require(idx[i] < x.cols, "pick", "column index out of range");
    out(i, 0) = x(i, idx[i]);
  }
  return a.tape().record("pick", std::move(out), {a},
                         [a, idx = std::move(idx)](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix& ga = t.grad(a);
                           for (std::size_t i = 0; i < idx.size(); ++i) ga(i, idx[i]) += g(i, 0);
                         });
}

// ------------------------------------------------------ reductions/reshaping

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return a.tape().record("sum", Matrix(1, 1, s), {a}, [a](Tape& t, const Matrix&, const Matrix& g) {
    for (double& v : t.grad(a).data) v += g.data[0];
  });
}

Var mean(Var a) {
  require(a.value().size() > 0, "mean", "empty operand");
  const double n = static_cast<double>(a.value().size());
  double s = 0.0;
  for (double v : a.value().data) s += v;
  return a.tape().record("mean", Matrix(1, 1, s / n), {a}, [a, n](Tape& t, const Matrix&, const Matrix& g) {
    for (double& v : t.grad(a).data) v += g.data[0] / n;
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& x = a.value();
  Matrix out(rows.size(), x.cols);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] < x.rows, "gather_rows", "row index out of range");
    std::copy(x.row(idx[k]).begin(), x.row(idx[k]).end(), out.row(k).begin());
  }
  return a.tape().record("gather_rows", std::move(out), {a},
                         [a, idx = std::move(idx)](Tape& t, const Matrix&, const Matrix& g) {
                           Matrix& ga = t.grad(a);
                           for (std::size_t k = 0; k < idx.size(); ++k) {
                             auto src = g.row(k);
                             auto dst = ga.row(idx[k]);
                             for (std::size_t j = 0; j < g.cols; ++j) dst[j] += src[j];
                           }
                         });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows", "no operands");
  Tape& t = parts.front().tape();
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows", "column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + offset * cols);
    offset += p.rows();
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return t.record("concat_rows", std::move(out), parts, [ins](Tape& t, const Matrix&, const Matrix& g) {
    std::size_t offset = 0;
    for (const Var& p : ins) {
      const std::size_t n = p.rows() * g.cols;
      if (t.needs_grad(p)) {
        Matrix& gp = t.grad(p);
        for (std::size_t k = 0; k < n; ++k) gp.data[k] += g.data[offset * g.cols + k];
      }
      offset += p.rows();
    }
  });
}

Var concat_rows(std::initializer_list<Var> parts) {
  return concat_rows(std::span<const Var>(parts.begin(), parts.size()));
}

}  // namespace ipal::ad
