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
#include <stdexcept>
#include <string>
#include <vector>

#include "ipal/matrix.hpp"

namespace ipal::graph {

using ClassId = int;

/// Thrown by load_graph; carries the 1-based line number of the offending line
/// (0 when the error is about the file as a whole).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Undirected node-attributed graph. Adjacency is symmetric and holds no
/// self-loops.
struct FullGraph {
  std::size_t num_nodes = 0;
  Csr adjacency;
  Matrix features;               // num_nodes × feature_dim
  std::vector<ClassId> labels;   // one per node
  std::vector<ClassId> class_set;  // sorted, distinct

  std::size_t feature_dim() const { return features.cols; }
  std::size_t num_edges() const { return adjacency.nnz() / 2; }

  /// Throws std::invalid_argument when any structural invariant is broken.
  void validate() const;
};

/// One task's induced subgraph. `labels` are the original (global) class ids
/// so predictions stay comparable across tasks.
struct TaskGraph {
  std::size_t task_id = 0;
  std::vector<std::size_t> node_map;  // local index -> original node id
  Csr adjacency;
  Matrix features;
  std::vector<ClassId> labels;
  std::vector<ClassId> classes;       // this task's class set, ascending
  std::vector<std::size_t> train;     // local indices, ascending
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  std::size_t num_nodes() const { return node_map.size(); }
  std::vector<bool> train_mask() const;
  std::vector<bool> val_mask() const;
  std::vector<bool> test_mask() const;
};

struct TaskSequence {
  std::vector<TaskGraph> tasks;
  std::vector<std::vector<ClassId>> class_partition;
};

/// Reads the line-oriented text format:
///
///   N D C
///   label f_1 ... f_D        (N rows)
///   E
///   u v                      (E rows, 0-based)
///
/// `#` starts a comment; blank lines are ignored. Edges listed once are
/// symmetrized and self-loops are dropped. Class ids that are not exactly
/// 0..C-1 are remapped in ascending order and a note is appended to
/// `warnings` when it is non-null.
FullGraph load_graph(const std::filesystem::path& path,
                     std::vector<std::string>* warnings = nullptr);
FullGraph parse_graph(std::istream& in, std::vector<std::string>* warnings = nullptr);

/// Writes `graph` in the format read by load_graph, each undirected edge once.
void save_graph(const std::filesystem::path& path, const FullGraph& graph);
void write_graph(std::ostream& out, const FullGraph& graph);

struct SbmParams {
  std::size_t classes = 6;
  std::size_t nodes_per_class = 100;
  double p_intra = 0.1;
  double q_inter = 0.01;
  std::size_t feature_dim = 16;
  double center_separation = 2.0;
  std::uint64_t seed = 0;
};

/// Stochastic block model with Gaussian class-conditional features. Nodes are
/// laid out class-major; class centers are at pairwise distance >=
/// center_separation; features are center + N(0, I).
FullGraph generate_sbm(const SbmParams& params);

/// Splits classes into a base task of `base_class_count` classes followed by
/// increments of `classes_per_increment`, in ascending class id order. Each
/// task keeps only the edges induced among its own nodes. Per class, val and
/// test get floor(0.2 n) nodes each and train gets the remainder.
TaskSequence split_tasks(const FullGraph& graph, std::size_t base_class_count,
                         std::size_t classes_per_increment, std::uint64_t split_seed);

}  // namespace ipal::graph
