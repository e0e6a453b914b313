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

#include "ipal/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ipal/experiment.hpp"
#include "ipal/nn.hpp"

namespace ipal::report {

namespace {

using exp::format_double;

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream s;
  fn(s);
  return s.str();
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  sd = 0.0;
  if (v.size() > 1) {
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / static_cast<double>(v.size() - 1));
  }
}

}  // namespace

void write_matrix_csv(std::ostream& out, const eval::PerformanceMatrix& m) {
  out << "t,i,accuracy\n";
  for (std::size_t t = 0; t < m.num_tasks(); ++t)
    for (std::size_t i = 0; i <= t; ++i) out << t << ',' << i << ',' << format_double(m.at(t, i)) << '\n';
}

eval::PerformanceMatrix read_matrix_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "t,i,accuracy") throw std::runtime_error("matrix.csv: bad header");
  std::map<std::size_t, std::map<std::size_t, double>> cells;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::size_t t = 0, i = 0;
    double a = 0.0;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> t >> c1 >> i >> c2 >> a) || c1 != ',' || c2 != ',')
      throw std::runtime_error("matrix.csv: malformed line " + std::to_string(lineno));
    if (!cells[t].emplace(i, a).second) throw std::runtime_error("matrix.csv: duplicate cell");
  }
  eval::PerformanceMatrix m;
  for (std::size_t t = 0; t < cells.size(); ++t) {
    auto it = cells.find(t);
    if (it == cells.end() || it->second.size() != t + 1) throw std::runtime_error("matrix.csv: not lower-triangular");
    std::vector<double> row;
    for (std::size_t i = 0; i <= t; ++i) {
      auto cell = it->second.find(i);
      if (cell == it->second.end()) throw std::runtime_error("matrix.csv: missing cell");
      row.push_back(cell->second);
    }
    m.append_row(std::move(row));
  }
  return m;
}

eval::PerformanceMatrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_matrix_csv(in);
}

void write_drift_csv(std::ostream& out, const eval::DriftReport& report) {
  out << "boundary,class,kl,mean_shift,trace_term,floored\n";
  for (const auto& e : report.entries)
    out << e.boundary << ',' << e.class_id << ',' << format_double(e.kl) << ',' << format_double(e.mean_shift) << ','
        << format_double(e.trace_term) << ',' << (e.floored ? 1 : 0) << '\n';
}

void write_epochs_csv(std::ostream& out, const std::vector<train::EpochLog>& epochs) {
  out << "task,epoch,pcl_term,ipad_term,total,hard,kept,filtered\n";
  for (const auto& e : epochs) {
    const auto& b = e.breakdown;
    out << e.task << ',' << e.epoch << ',' << format_double(b.pcl_term) << ',' << format_double(b.ipad_term) << ','
        << format_double(b.total) << ',' << b.num_hard_negatives_used << ',' << b.num_mixup_kept << ','
        << b.num_mixup_filtered << '\n';
  }
}

void write_metrics(std::ostream& out, const train::RunRecord& record) {
  const auto& m = record.test_matrix;
  out << "[metrics]\n";
  for (std::size_t t = 1; t <= m.num_tasks(); ++t) {
    out << "ap_" << t << " = " << format_double(eval::average_performance(m, t)) << '\n';
    if (auto af = eval::average_forgetting(m, t)) out << "af_" << t << " = " << format_double(*af) << '\n';
  }
  const std::size_t n = m.num_tasks();
  if (n > 0) {
    out << "final_ap = " << format_double(eval::average_performance(m, n)) << '\n';
    if (auto af = eval::average_forgetting(m, n)) out << "final_af = " << format_double(*af) << '\n';
    out << "final_val_ap = " << format_double(eval::average_performance(record.val_matrix, n)) << '\n';
  }
  out << "mean_drift_kl = " << format_double(record.drift.mean_kl()) << '\n';
  out << "state_bytes = ";
  for (std::size_t i = 0; i < record.state_bytes.size(); ++i) out << (i ? "," : "") << record.state_bytes[i];
  out << "\nstate_audit = " << (record.state_audit_passed ? "pass" : "fail") << '\n';
}

void export_run(const train::RunRecord& record, const std::filesystem::path& dir, const ExportOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  write_file(dir / "matrix.csv", render([&](std::ostream& o) { write_matrix_csv(o, record.test_matrix); }));
  write_file(dir / "val_matrix.csv", render([&](std::ostream& o) { write_matrix_csv(o, record.val_matrix); }));
  write_file(dir / "drift.csv", render([&](std::ostream& o) { write_drift_csv(o, record.drift); }));
  write_file(dir / "epochs.csv", render([&](std::ostream& o) { write_epochs_csv(o, record.epochs); }));
  write_file(dir / "summary.txt", render([&](std::ostream& o) {
               o << options.config_echo;
               if (!options.config_echo.empty() && options.config_echo.back() != '\n') o << '\n';
               o << '\n';
               write_metrics(o, record);
             }));
  write_file(dir / "timing.csv", render([&](std::ostream& o) {
               o << "task,seconds\n";
               for (std::size_t t = 0; t < record.seconds_per_task.size(); ++t)
                 o << t << ',' << format_double(record.seconds_per_task[t]) << '\n';
             }));

  if (options.dump_embeddings) {
    if (!options.sequence || !record.final_state)
      throw std::invalid_argument("export_run: embedding dump needs the task sequence and final state");
    for (const auto& task : options.sequence->tasks) {
      const Matrix emb = record.final_state->encoder.embed(nn::PreparedGraph::from(task));
      write_file(dir / ("embeddings_task" + std::to_string(task.task_id) + ".csv"), render([&](std::ostream& o) {
                   o << "node,label";
                   for (std::size_t j = 0; j < emb.cols; ++j) o << ",f_" << j + 1;
                   o << '\n';
                   for (std::size_t x = 0; x < emb.rows; ++x) {
                     o << task.node_map[x] << ',' << task.labels[x];
                     for (double v : emb.row(x)) o << ',' << format_double(v);
                     o << '\n';
                   }
                 }));
    }
  }
}

std::vector<AggregateRow> aggregate(std::span<const eval::PerformanceMatrix> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  const std::size_t n = runs.front().num_tasks();
  for (const auto& r : runs)
    if (r.num_tasks() != n) throw std::invalid_argument("aggregate: runs cover different task counts");
  std::vector<AggregateRow> rows;
  for (std::size_t t = 1; t <= n; ++t) {
    AggregateRow row;
    row.t = t;
    std::vector<double> ap, af;
    for (const auto& r : runs) {
      ap.push_back(eval::average_performance(r, t));
      if (auto f = eval::average_forgetting(r, t)) af.push_back(*f);
    }
    mean_std(ap, row.ap_mean, row.ap_std);
    if (!af.empty()) {
      double m = 0.0, s = 0.0;
      mean_std(af, m, s);
      row.af_mean = m;
      row.af_std = s;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_aggregate(std::ostream& out, std::span<const eval::PerformanceMatrix> runs,
                     const std::vector<std::string>& run_labels) {
  out << "runs = " << runs.size() << '\n';
  for (const auto& label : run_labels) out << "run = " << label << '\n';
  out << "t,ap_mean,ap_std,af_mean,af_std\n";
  for (const auto& row : aggregate(runs)) {
    out << row.t << ',' << format_double(row.ap_mean) << ',' << format_double(row.ap_std) << ',';
    if (row.af_mean)
      out << format_double(*row.af_mean) << ',' << format_double(*row.af_std);
    else
      out << ',';
    out << '\n';
  }
}

std::size_t select_argmax(std::span<const double> keys, std::span<const double> scores) {
  if (keys.empty() || keys.size() != scores.size()) throw std::invalid_argument("select_argmax: bad input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < keys.size(); ++i)
    if (scores[i] > scores[best] || (scores[i] == scores[best] && keys[i] < keys[best])) best = i;
  return best;
}

}  // namespace ipal::report
