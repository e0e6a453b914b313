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


#include "doctest.h"
#include "ipal/experiment.hpp"
#include "ipal/report.hpp"
#include "support/cli.hpp"

#include <sstream>

using namespace ipal;
using namespace ipal::exp;
namespace fs = std::filesystem;
using ipal::testing::run_cli;
using ipal::testing::scratch_dir;
using ipal::testing::slurp;

namespace {

ExperimentSpec parse(const std::string& text) {
  std::istringstream in(text);
  return read_spec(in);
}

// Small enough to train in well under a second.
const char* kTinyConfig =
    "[dataset]\nclasses = 4\nnodes_per_class = 20\np_intra = 0.3\nq_inter = 0.02\nfeature_dim = 6\n"
    "[split]\nbase_classes = 2\nclasses_per_increment = 1\n"
    "[train]\nepochs = 3\nepochs_inc = 2\ngamma = 0.25\n"
    "[run]\nseeds = 4\n";

}  // namespace

TEST_CASE("spec write and read round-trip every field") {
  ExperimentSpec s;
  s.dataset.sbm.classes = 8;
  s.dataset.sbm.p_intra = 0.123456789012345;
  s.split.base_classes = 4;
  s.train.method = train::Method::PR_FD;
  s.train.gamma = 0.1 + 0.2;  // not a short decimal
  s.train.normalize = false;
  s.seeds = {3, 1, 4};
  s.checkpoints = true;
  std::ostringstream out;
  write_spec(out, s);
  const ExperimentSpec back = parse(out.str());
  std::ostringstream again;
  write_spec(again, back);
  CHECK(again.str() == out.str());
  CHECK(back.train == s.train);
  CHECK(back.seeds == s.seeds);
  CHECK(back.dataset.sbm.p_intra == s.dataset.sbm.p_intra);
}

TEST_CASE("a metrics section is ignored") {
  const auto s = parse("[train]\ngamma = 0.5\n[metrics]\nap_final = 0.9\nanything = goes\n");
  CHECK(s.train.gamma == 0.5);
}

TEST_CASE("unknown keys and malformed values are rejected") {
  CHECK_THROWS_AS(parse("[train]\ngama = 0.5\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("[nosuch]\nx = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("[train]\ngamma = half\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("[train]\nnormalize = maybe\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("[train]\nepochs = -3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("[train]\nmethod = nope\n"), std::invalid_argument);
}

TEST_CASE("spec validation") {
  ExperimentSpec s;
  CHECK_NOTHROW(s.validate());
  s.seeds.clear();
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = ExperimentSpec{};
  s.train.gamma = -0.1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("list parsing") {
  CHECK(parse_seed_list("0,1, 2") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(parse_real_list("0.5,1") == std::vector<double>{0.5, 1.0});
  CHECK_THROWS_AS(parse_seed_list("1,,2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_real_list("x"), std::invalid_argument);
}

TEST_CASE("generated spec sequence matches a direct split") {
  const auto s = parse(kTinyConfig);
  const auto seq = build_sequence(s);
  CHECK(seq.tasks.size() == 3);
  CHECK(seq.tasks[0].classes == std::vector<graph::ClassId>{0, 1});
}

TEST_CASE("cli: generate is deterministic and rejects q above p") {
  const auto dir = scratch_dir("ipal_cli_generate");
  CHECK(run_cli("generate --graph_seed 5 --classes 3 -o \"" + (dir / "a.txt").string() + "\"") == 0);
  CHECK(run_cli("generate --graph_seed 5 --classes 3 -o \"" + (dir / "b.txt").string() + "\"") == 0);
  CHECK(run_cli("generate --graph_seed 6 --classes 3 -o \"" + (dir / "c.txt").string() + "\"") == 0);
  CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));
  CHECK(slurp(dir / "a.txt") != slurp(dir / "c.txt"));
  CHECK(graph::load_graph(dir / "a.txt").class_set.size() == 3);
  CHECK(run_cli("generate --p_intra 0.1 --q_inter 0.2 -o \"" + (dir / "d.txt").string() + "\"") != 0);
  CHECK_FALSE(fs::exists(dir / "d.txt"));
  fs::remove_all(dir);
}

TEST_CASE("cli: run exports the documented files and the summary reproduces the run") {
  const auto dir = scratch_dir("ipal_cli_run");
  std::ofstream(dir / "tiny.ini") << kTinyConfig;
  REQUIRE(run_cli("run --config \"" + (dir / "tiny.ini").string() + "\" -o \"" + (dir / "a").string() + "\"") == 0);
  const auto seed_dir = dir / "a" / "seed_4";
  for (const char* f : {"matrix.csv", "val_matrix.csv", "drift.csv", "epochs.csv", "summary.txt", "timing.csv"})
    CHECK(fs::exists(seed_dir / f));
  CHECK_FALSE(fs::exists(seed_dir / "INCOMPLETE"));
  CHECK(fs::exists(dir / "a" / "aggregate.txt"));
  CHECK(report::load_matrix_csv(seed_dir / "matrix.csv").num_tasks() == 3);

  // Feed the summary (config echo plus metrics) straight back in.
  REQUIRE(run_cli("run --config \"" + (seed_dir / "summary.txt").string() + "\" -o \"" + (dir / "b").string() +
                  "\"") == 0);
  const auto again = dir / "b" / "seed_4";
  CHECK(slurp(again / "matrix.csv") == slurp(seed_dir / "matrix.csv"));
  CHECK(slurp(again / "epochs.csv") == slurp(seed_dir / "epochs.csv"));
  CHECK(slurp(again / "summary.txt") == slurp(seed_dir / "summary.txt"));

  // A flag overrides the file.
  REQUIRE(run_cli("run --config \"" + (dir / "tiny.ini").string() + "\" --gamma 0.75 -o \"" + (dir / "c").string() +
                  "\"") == 0);
  CHECK(load_spec(dir / "c" / "seed_4" / "summary.txt").train.gamma == 0.75);
  fs::remove_all(dir);
}

TEST_CASE("cli: unknown options and bad configs fail") {
  const auto dir = scratch_dir("ipal_cli_bad");
  std::ofstream(dir / "bad.ini") << "[train]\nnot_a_key = 1\n";
  CHECK(run_cli("run --config \"" + (dir / "bad.ini").string() + "\" -o \"" + (dir / "x").string() + "\"") != 0);
  CHECK(run_cli("run --no-such-flag") != 0);
  CHECK(run_cli("") != 0);
  fs::remove_all(dir);
}

TEST_CASE("cli: sweep marks the validation argmax") {
  const auto dir = scratch_dir("ipal_cli_sweep");
  std::ofstream(dir / "tiny.ini") << kTinyConfig;
  REQUIRE(run_cli("sweep-gamma --config \"" + (dir / "tiny.ini").string() + "\" --grid 0.2,0.6 -o \"" +
                  (dir / "s").string() + "\"") == 0);
  std::istringstream csv(slurp(dir / "s" / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "gamma,val_ap,test_ap,selected");
  std::size_t rows = 0, selected = 0;
  while (std::getline(csv, line)) {
    ++rows;
    if (line.back() == '1') ++selected;
  }
  CHECK(rows == 2);
  CHECK(selected == 1);
  fs::remove_all(dir);
}
