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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipal/evaluation.hpp"
#include "ipal/trainer.hpp"

// Run exports. Per-run directory layout:
//   matrix.csv      t,i,accuracy          (test accuracy, 0-based task indices)
//   val_matrix.csv  t,i,accuracy          (validation accuracy)
//   drift.csv       boundary,class,kl,mean_shift,trace_term,floored
//   epochs.csv      task,epoch,pcl_term,ipad_term,total,hard,kept,filtered
//   summary.txt     config echo followed by a [metrics] section
//   timing.csv      task,seconds          (wall clock; not deterministic)
//   embeddings_task<i>.csv                (optional) node,label,f_1..f_d

namespace ipal::report {

void write_matrix_csv(std::ostream& out, const eval::PerformanceMatrix& m);
/// Throws std::runtime_error on malformed input or a non-triangular matrix.
eval::PerformanceMatrix read_matrix_csv(std::istream& in);
eval::PerformanceMatrix load_matrix_csv(const std::filesystem::path& path);

void write_drift_csv(std::ostream& out, const eval::DriftReport& report);
void write_epochs_csv(std::ostream& out, const std::vector<train::EpochLog>& epochs);
/// [metrics] section: AP and AF per task count, final values, state audit.
void write_metrics(std::ostream& out, const train::RunRecord& record);

struct ExportOptions {
  std::string config_echo;                            // written at the top of summary.txt
  const graph::TaskSequence* sequence = nullptr;      // needed for embedding dumps
  bool dump_embeddings = false;
};

/// Writes the files listed above into `dir`, creating it if needed. Throws
/// std::runtime_error when a file cannot be written.
void export_run(const train::RunRecord& record, const std::filesystem::path& dir, const ExportOptions& options);

struct AggregateRow {
  std::size_t t = 0;  // 1-based task count
  double ap_mean = 0.0;
  double ap_std = 0.0;
  std::optional<double> af_mean;
  std::optional<double> af_std;
};

/// Mean and sample standard deviation (n − 1; 0 for a single run) of AP_t and
/// AF_t across runs. All matrices must have the same number of tasks.
std::vector<AggregateRow> aggregate(std::span<const eval::PerformanceMatrix> runs);
void write_aggregate(std::ostream& out, std::span<const eval::PerformanceMatrix> runs,
                     const std::vector<std::string>& run_labels);

/// Index of the largest score; ties go to the smaller key. Keys and scores are
/// parallel arrays.
std::size_t select_argmax(std::span<const double> keys, std::span<const double> scores);

}  // namespace ipal::report
