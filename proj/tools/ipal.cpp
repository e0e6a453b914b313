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

// Command-line driver: generate | run | sweep-gamma | drift-report.

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ipal/experiment.hpp"
#include "ipal/report.hpp"
#include "ipal/trainer.hpp"

namespace fs = std::filesystem;
using namespace ipal;

namespace {

constexpr const char* kIncompleteMarker = "INCOMPLETE";

struct CommonArgs {
  std::string config;
  std::string output;
  bool log_epochs = false;
  std::map<std::string, std::string> overrides;  // key -> raw flag value
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_output = true) {
  cmd->add_option("--config", args.config, "experiment config file")->check(CLI::ExistingFile);
  if (with_output) cmd->add_option("-o,--output", args.output, "output directory (default: $IPAL_OUTPUT_ROOT/<command>)");
  cmd->add_flag("--log-epochs", args.log_epochs, "print one line per training epoch to stderr");
  for (const auto& f : exp::fields()) {
    auto* opt = cmd->add_option_function<std::string>(
        "--" + f.key, [&args, key = f.key](const std::string& v) { args.overrides[key] = v; },
        f.help + " [" + f.section + "]");
    opt->type_name(f.section == "train" ? "TRAIN" : "VALUE");
  }
}

exp::ExperimentSpec resolve_spec(const CommonArgs& args) {
  exp::ExperimentSpec spec = args.config.empty() ? exp::ExperimentSpec{} : exp::load_spec(args.config);
  for (const auto& f : exp::fields()) {
    auto it = args.overrides.find(f.key);
    if (it != args.overrides.end()) exp::set_field(spec, f.section, f.key, it->second);
  }
  spec.validate();
  return spec;
}

fs::path output_dir(const CommonArgs& args, const std::string& command) {
  return args.output.empty() ? exp::default_output_root() / command : fs::path(args.output);
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::optional<train::RunRecord> record;
  std::string error;
};

std::mutex g_log_mutex;

void log_line(const std::string& s) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << s << '\n';
}

std::string config_echo(exp::ExperimentSpec spec, std::uint64_t seed) {
  spec.seeds = {seed};
  std::ostringstream s;
  exp::write_spec(s, spec);
  return s.str();
}

// Runs every seed of `spec` into `root/seed_<s>` and writes `root/aggregate.txt`.
// Returns false if any seed failed or failed an audit.
bool run_seeds(const exp::ExperimentSpec& spec, const graph::TaskSequence& sequence, const fs::path& root,
               bool log_epochs, std::vector<SeedResult>& results) {
  fs::create_directories(root);
  results.assign(spec.seeds.size(), {});
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < spec.seeds.size();) {
      SeedResult& res = results[i];
      res.seed = spec.seeds[i];
      const fs::path dir = root / ("seed_" + std::to_string(res.seed));
      try {
        fs::create_directories(dir);
        std::ofstream(dir / kIncompleteMarker) << "run started\n";
        train::TrainConfig cfg = spec.train;
        cfg.seed = res.seed;
        train::RunOptions opts;
        if (spec.checkpoints) opts.checkpoint_dir = dir / "checkpoints";
        if (log_epochs) {
          opts.on_epoch = [seed = res.seed](const train::EpochLog& e) {
            const auto& b = e.breakdown;
            std::ostringstream s;
            s << "epoch seed=" << seed << " task=" << e.task << " epoch=" << e.epoch << " pcl=" << b.pcl_term
              << " ipad=" << b.ipad_term << " total=" << b.total << " hard=" << b.num_hard_negatives_used
              << " kept=" << b.num_mixup_kept << " filtered=" << b.num_mixup_filtered;
            log_line(s.str());
          };
        }
        auto record = train::run_sequence(sequence, cfg, opts);
        report::ExportOptions ex;
        ex.config_echo = config_echo(spec, res.seed);
        ex.sequence = &sequence;
        ex.dump_embeddings = spec.dump_embeddings;
        report::export_run(record, dir, ex);
        if (!record.state_audit_passed) throw std::runtime_error("non-exemplar state audit failed");
        if (record.test_matrix.num_tasks() != sequence.tasks.size())
          throw std::runtime_error("performance matrix has the wrong number of rows");
        fs::remove(dir / kIncompleteMarker);
        res.record = std::move(record);
        const std::size_t n = res.record->test_matrix.num_tasks();
        std::ostringstream s;
        s << "seed " << res.seed << ": AP " << exp::format_double(eval::average_performance(res.record->test_matrix, n));
        if (auto af = eval::average_forgetting(res.record->test_matrix, n)) s << "  AF " << exp::format_double(*af);
        log_line(s.str());
      } catch (const std::exception& e) {
        res.error = e.what();
        std::ofstream(dir / kIncompleteMarker) << "run failed: " << e.what() << '\n';
        log_line("seed " + std::to_string(res.seed) + " failed: " + e.what());
      }
    }
  };

  const std::size_t jobs = std::min(spec.jobs, spec.seeds.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<eval::PerformanceMatrix> matrices;
  std::vector<std::string> labels;
  bool ok = true;
  for (const auto& r : results) {
    if (!r.record) {
      ok = false;
      continue;
    }
    matrices.push_back(r.record->test_matrix);
    labels.push_back("seed_" + std::to_string(r.seed));
  }
  if (!matrices.empty()) {
    std::ofstream out(root / "aggregate.txt");
    report::write_aggregate(out, matrices, labels);
    if (!ok) out << "incomplete = true\n";
  }
  return ok;
}

int cmd_generate(const CommonArgs& args) {
  const auto spec = resolve_spec(args);
  const fs::path out = args.output.empty() ? exp::default_output_root() / "graph.txt" : fs::path(args.output);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto g = graph::generate_sbm(spec.dataset.sbm);
  graph::save_graph(out, g);
  std::cout << "wrote " << out.string() << " (" << g.num_nodes << " nodes, " << g.num_edges() << " edges, "
            << g.class_set.size() << " classes)\n";
  return 0;
}

int cmd_run(const CommonArgs& args) {
  const auto spec = resolve_spec(args);
  const auto sequence = exp::build_sequence(spec);
  std::vector<SeedResult> results;
  const fs::path root = output_dir(args, "run");
  const bool ok = run_seeds(spec, sequence, root, args.log_epochs, results);
  std::ifstream agg(root / "aggregate.txt");
  if (agg) std::cout << agg.rdbuf();
  return ok ? 0 : 1;
}

int cmd_sweep_gamma(const CommonArgs& args, const std::string& grid_text) {
  auto spec = resolve_spec(args);
  std::vector<double> grid;
  if (grid_text.empty()) {
    for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
  } else {
    grid = exp::parse_real_list(grid_text);
  }
  const auto sequence = exp::build_sequence(spec);
  const fs::path root = output_dir(args, "sweep-gamma");
  std::vector<double> val_ap, test_ap;
  bool ok = true;
  for (double g : grid) {
    spec.train.gamma = g;
    spec.validate();
    std::vector<SeedResult> results;
    ok = run_seeds(spec, sequence, root / ("gamma_" + exp::format_double(g)), args.log_epochs, results) && ok;
    double v = 0.0, t = 0.0;
    std::size_t n = 0;
    for (const auto& r : results) {
      if (!r.record) continue;
      const std::size_t tasks = r.record->test_matrix.num_tasks();
      v += eval::average_performance(r.record->val_matrix, tasks);
      t += eval::average_performance(r.record->test_matrix, tasks);
      ++n;
    }
    val_ap.push_back(n ? v / static_cast<double>(n) : 0.0);
    test_ap.push_back(n ? t / static_cast<double>(n) : 0.0);
  }
  const std::size_t best = report::select_argmax(grid, val_ap);
  std::ofstream out(root / "sweep.csv");
  out << "gamma,val_ap,test_ap,selected\n";
  std::cout << "gamma      val_ap     test_ap\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << exp::format_double(grid[i]) << ',' << exp::format_double(val_ap[i]) << ',' << exp::format_double(test_ap[i])
        << ',' << (i == best ? 1 : 0) << '\n';
    char line[96];
    std::snprintf(line, sizeof line, "%-9g  %.4f     %.4f%s\n", grid[i], val_ap[i], test_ap[i],
                  i == best ? "   <- selected" : "");
    std::cout << line;
  }
  return ok ? 0 : 1;
}

int cmd_drift_report(const CommonArgs& args, const std::string& methods_text) {
  auto spec = resolve_spec(args);
  std::vector<train::Method> methods;
  std::stringstream ss(methods_text);
  for (std::string m; std::getline(ss, m, ',');) methods.push_back(train::parse_method(m));
  const auto sequence = exp::build_sequence(spec);
  const fs::path root = output_dir(args, "drift-report");
  fs::create_directories(root);
  std::ofstream out(root / "drift_report.csv");
  out << "method,seed,boundary,class,kl,mean_shift,trace_term\n";
  bool ok = true;
  std::cout << "method            mean_kl(final boundary)\n";
  for (auto m : methods) {
    spec.train.method = m;
    std::vector<SeedResult> results;
    ok = run_seeds(spec, sequence, root / train::to_string(m), args.log_epochs, results) && ok;
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& r : results) {
      if (!r.record) continue;
      const std::size_t last = r.record->test_matrix.num_tasks() - 1;
      for (const auto& e : r.record->drift.entries) {
        out << train::to_string(m) << ',' << r.seed << ',' << e.boundary << ',' << e.class_id << ','
            << exp::format_double(e.kl) << ',' << exp::format_double(e.mean_shift) << ','
            << exp::format_double(e.trace_term) << '\n';
        if (e.boundary == last) {
          total += e.kl;
          ++count;
        }
      }
    }
    char line[96];
    std::snprintf(line, sizeof line, "%-16s  %.6g\n", train::to_string(m).c_str(),
                  count ? total / static_cast<double>(count) : 0.0);
    std::cout << line;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-exemplar continual graph learning experiments"};
  app.require_subcommand(1);

  CommonArgs gen_args, run_args, sweep_args, drift_args;
  std::string grid, methods = "PCL,PR";

  auto* gen = app.add_subcommand("generate", "write a synthetic SBM graph file");
  add_common(gen, gen_args);
  auto* run = app.add_subcommand("run", "train every seed and export results");
  add_common(run, run_args);
  auto* sweep = app.add_subcommand("sweep-gamma", "select gamma by validation AP");
  add_common(sweep, sweep_args);
  sweep->add_option("--grid", grid, "comma-separated gamma values (default 0.1,...,1.0)");
  auto* drift = app.add_subcommand("drift-report", "compare base-class feature drift across methods");
  add_common(drift, drift_args);
  drift->add_option("--methods", methods, "comma-separated methods")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_args);
    if (run->parsed()) return cmd_run(run_args);
    if (sweep->parsed()) return cmd_sweep_gamma(sweep_args, grid);
    if (drift->parsed()) return cmd_drift_report(drift_args, methods);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
