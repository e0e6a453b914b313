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
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ipal/graph_store.hpp"
#include "ipal/trainer.hpp"

// Experiment specification: one INI-style text file with [dataset], [split],
// [train] and [run] sections. Keys in [train] are the TrainConfig field
// names. A [metrics] section (present in exported summaries) is ignored, so a
// summary can be fed back in as a config.

namespace ipal::exp {

struct DatasetSpec {
  std::string path;  // empty: generate an SBM graph from `sbm`
  graph::SbmParams sbm;
};

struct SplitSpec {
  std::size_t base_classes = 2;
  std::size_t classes_per_increment = 2;
  std::uint64_t split_seed = 0;
};

struct ExperimentSpec {
  DatasetSpec dataset;
  SplitSpec split;
  train::TrainConfig train;
  std::vector<std::uint64_t> seeds{0};
  std::size_t jobs = 1;
  bool dump_embeddings = false;
  bool checkpoints = false;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// One configurable key. The same table drives parsing, the config echo and
/// the command-line flags.
struct Field {
  std::string section;
  std::string key;
  std::string help;
  std::function<std::string(const ExperimentSpec&)> get;
  std::function<void(ExperimentSpec&, const std::string&)> set;
};

const std::vector<Field>& fields();

/// Sets `section.key`; throws std::invalid_argument for an unknown key or a
/// malformed value.
void set_field(ExperimentSpec& spec, const std::string& section, const std::string& key,
               const std::string& value);

ExperimentSpec read_spec(std::istream& in);
ExperimentSpec load_spec(const std::filesystem::path& path);
/// Writes every field; doubles use 17 significant digits so the echo
/// reproduces the run exactly.
void write_spec(std::ostream& out, const ExperimentSpec& spec);

std::string format_double(double v);
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
std::vector<double> parse_real_list(const std::string& text);

graph::FullGraph load_dataset(const ExperimentSpec& spec);
graph::TaskSequence build_sequence(const ExperimentSpec& spec);

/// Default output root: $IPAL_OUTPUT_ROOT, else "runs".
std::filesystem::path default_output_root();

}  // namespace ipal::exp
