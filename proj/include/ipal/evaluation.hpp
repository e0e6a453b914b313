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

#include <optional>
#include <span>
#include <vector>

#include "ipal/graph_store.hpp"
#include "ipal/matrix.hpp"

namespace ipal::eval {

using graph::ClassId;

/// Lower-triangular accuracy matrix. Row t (0-based) holds the accuracy on
/// tasks 0..t after training task t.
class PerformanceMatrix {
 public:
  /// Appends the row for the next task; it must have exactly num_tasks()+1
  /// entries, each in [0, 1].
  void append_row(std::vector<double> row);
  std::size_t num_tasks() const { return rows_.size(); }
  /// 0-based access, i <= t.
  double at(std::size_t t, std::size_t i) const;
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  friend bool operator==(const PerformanceMatrix&, const PerformanceMatrix&) = default;

 private:
  std::vector<std::vector<double>> rows_;
};

// Metrics use 1-based t, matching the usual definition:
//   AP_t = Σ_{i=1..t} M[t][i] / t
//   AF_t = Σ_{i=1..t−1} (M[t][i] − M[i][i]) / (t − 1)
// AF is negative when accuracy drops; it is absent for t = 1.
double average_performance(const PerformanceMatrix& m, std::size_t t);
std::optional<double> average_forgetting(const PerformanceMatrix& m, std::size_t t);

/// Fraction of `nodes` whose prediction equals the label.
double accuracy(std::span<const ClassId> predicted, std::span<const ClassId> labels,
                std::span<const std::size_t> nodes);

inline constexpr double kVarianceFloor = 1e-8;

/// KL(N(μ, diag v) ‖ N(μ', diag v')) =
///   ½ Σ_d [log(v'_d / v_d) + v_d / v'_d + (μ'_d − μ_d)² / v'_d − 1].
/// Throws std::invalid_argument on a non-positive variance or length mismatch.
double gaussian_kl_diag(std::span<const double> mu_old, std::span<const double> var_old,
                        std::span<const double> mu_new, std::span<const double> var_new);

struct DriftEntry {
  std::size_t boundary = 0;  // task index after which the measurement was taken
  ClassId class_id = 0;
  double kl = 0.0;
  double mean_shift = 0.0;   // ‖μ' − μ‖₂
  double trace_term = 0.0;   // Σ_d (v_d / v'_d − 1)
  bool floored = false;      // some variance was raised to kVarianceFloor
};

struct DriftReport {
  std::vector<DriftEntry> entries;
  double mean_kl() const;
};

/// Fits per-class diagonal Gaussians (unweighted, population variance, floored)
/// to the rows `nodes` of the old and new embeddings and compares them.
/// `old_embeddings` and `new_embeddings` are row-aligned.
DriftReport measure_drift(const Matrix& old_embeddings, const Matrix& new_embeddings,
                          std::span<const ClassId> labels, std::span<const std::size_t> nodes,
                          std::span<const ClassId> classes, std::size_t boundary);

}  // namespace ipal::eval
