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

#include "ipal/evaluation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ipal::eval {

void PerformanceMatrix::append_row(std::vector<double> row) {
  if (row.size() != rows_.size() + 1)
    throw std::invalid_argument("PerformanceMatrix: row " + std::to_string(rows_.size()) + " needs " +
                                std::to_string(rows_.size() + 1) + " entries");
  for (double a : row)
    if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("PerformanceMatrix: accuracy outside [0, 1]");
  rows_.push_back(std::move(row));
}

double PerformanceMatrix::at(std::size_t t, std::size_t i) const {
  if (t >= rows_.size() || i > t) throw std::out_of_range("PerformanceMatrix: entry outside the lower triangle");
  return rows_[t][i];
}

double average_performance(const PerformanceMatrix& m, std::size_t t) {
  if (t < 1 || t > m.num_tasks()) throw std::out_of_range("average_performance: t out of range");
  double s = 0.0;
  for (std::size_t i = 0; i < t; ++i) s += m.at(t - 1, i);
  return s / static_cast<double>(t);
}

std::optional<double> average_forgetting(const PerformanceMatrix& m, std::size_t t) {
  if (t < 1 || t > m.num_tasks()) throw std::out_of_range("average_forgetting: t out of range");
  if (t == 1) return std::nullopt;
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < t; ++i) s += m.at(t - 1, i) - m.at(i, i);
  return s / static_cast<double>(t - 1);
}

double accuracy(std::span<const ClassId> predicted, std::span<const ClassId> labels,
                std::span<const std::size_t> nodes) {
  if (nodes.empty()) throw std::invalid_argument("accuracy: no nodes");
  std::size_t hits = 0;
  for (std::size_t x : nodes) hits += predicted[x] == labels[x];
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

double gaussian_kl_diag(std::span<const double> mu_old, std::span<const double> var_old,
                        std::span<const double> mu_new, std::span<const double> var_new) {
  const std::size_t d = mu_old.size();
  if (var_old.size() != d || mu_new.size() != d || var_new.size() != d)
    throw std::invalid_argument("gaussian_kl_diag: length mismatch");
  double kl = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double v = var_old[j];
    const double w = var_new[j];
    if (!(v > 0.0) || !(w > 0.0)) throw std::invalid_argument("gaussian_kl_diag: variances must be positive");
    const double dm = mu_new[j] - mu_old[j];
    kl += std::log(w / v) + v / w + dm * dm / w - 1.0;
  }
  return 0.5 * kl;
}

double DriftReport::mean_kl() const {
  if (entries.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : entries) s += e.kl;
  return s / static_cast<double>(entries.size());
}

namespace {

struct Fit {
  std::vector<double> mean;
  std::vector<double> var;
  bool floored = false;
};

Fit fit_class(const Matrix& emb, std::span<const ClassId> labels, std::span<const std::size_t> nodes, ClassId c) {
  const std::size_t d = emb.cols;
  Fit f{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0), false};
  std::size_t n = 0;
  for (std::size_t x : nodes) {
    if (labels[x] != c) continue;
    for (std::size_t j = 0; j < d; ++j) f.mean[j] += emb(x, j);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("measure_drift: class " + std::to_string(c) + " has no nodes");
  for (double& m : f.mean) m /= static_cast<double>(n);
  for (std::size_t x : nodes) {
    if (labels[x] != c) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = emb(x, j) - f.mean[j];
      f.var[j] += diff * diff;
    }
  }
  for (double& v : f.var) {
    v /= static_cast<double>(n);
    if (v < kVarianceFloor) {
      v = kVarianceFloor;
      f.floored = true;
    }
  }
  return f;
}

}  // namespace

DriftReport measure_drift(const Matrix& old_embeddings, const Matrix& new_embeddings,
                          std::span<const ClassId> labels, std::span<const std::size_t> nodes,
                          std::span<const ClassId> classes, std::size_t boundary) {
  if (!old_embeddings.same_shape(new_embeddings))
    throw std::invalid_argument("measure_drift: old/new embeddings must be row-aligned");
  if (labels.size() != old_embeddings.rows) throw std::invalid_argument("measure_drift: one label per row required");
  DriftReport report;
  for (ClassId c : classes) {
    const Fit a = fit_class(old_embeddings, labels, nodes, c);
    const Fit b = fit_class(new_embeddings, labels, nodes, c);
    DriftEntry e;
    e.boundary = boundary;
    e.class_id = c;
    e.kl = gaussian_kl_diag(a.mean, a.var, b.mean, b.var);
    double shift = 0.0;
    for (std::size_t j = 0; j < a.mean.size(); ++j) {
      const double dm = b.mean[j] - a.mean[j];
      shift += dm * dm;
      e.trace_term += a.var[j] / b.var[j] - 1.0;
    }
    e.mean_shift = std::sqrt(shift);
    e.floored = a.floored || b.floored;
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace ipal::eval
