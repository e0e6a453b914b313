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

#include "ipal/graph_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ipal/random.hpp"

namespace ipal::graph {

namespace {

std::vector<bool> to_mask(std::size_t n, const std::vector<std::size_t>& idx) {
  std::vector<bool> m(n, false);
  for (auto i : idx) m[i] = true;
  return m;
}

std::vector<std::pair<std::size_t, std::size_t>> symmetrize(
    const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u == v) continue;
    out.emplace_back(u, v);
    out.emplace_back(v, u);
  }
  return out;
}

// Splits the next non-empty, non-comment line into tokens.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      tokens.clear();
      for (std::string tok; ss >> tok;) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

long long parse_int(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected an integer, got '" + tok + "'");
  }
  if (used != tok.size()) throw ParseError(line, "expected an integer, got '" + tok + "'");
  return v;
}

double parse_real(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ParseError(line, "expected a number, got '" + tok + "'");
  }
  if (used != tok.size()) throw ParseError(line, "expected a number, got '" + tok + "'");
  if (!std::isfinite(v)) throw ParseError(line, "non-finite feature value");
  return v;
}

}  // namespace

void FullGraph::validate() const {
  if (features.rows != num_nodes) throw std::invalid_argument("feature row count != num_nodes");
  if (features.cols == 0) throw std::invalid_argument("feature_dim must be positive");
  if (!all_finite(features)) throw std::invalid_argument("non-finite feature value");
  if (labels.size() != num_nodes) throw std::invalid_argument("label count != num_nodes");
  if (adjacency.n != num_nodes) throw std::invalid_argument("adjacency size != num_nodes");
  if (!std::is_sorted(class_set.begin(), class_set.end()) ||
      std::adjacent_find(class_set.begin(), class_set.end()) != class_set.end())
    throw std::invalid_argument("class_set must be sorted and distinct");
  for (ClassId y : labels)
    if (!std::binary_search(class_set.begin(), class_set.end(), y))
      throw std::invalid_argument("label outside class_set");
  for (std::size_t i = 0; i < num_nodes; ++i)
    if (adjacency.has_entry(i, i)) throw std::invalid_argument("self-loop stored in adjacency");
  if (!adjacency.is_symmetric()) throw std::invalid_argument("adjacency is not symmetric");
}

std::vector<bool> TaskGraph::train_mask() const { return to_mask(num_nodes(), train); }
std::vector<bool> TaskGraph::val_mask() const { return to_mask(num_nodes(), val); }
std::vector<bool> TaskGraph::test_mask() const { return to_mask(num_nodes(), test); }

FullGraph parse_graph(std::istream& in, std::vector<std::string>* warnings) {
  LineReader reader(in);
  std::vector<std::string> tok;

  if (!reader.next(tok)) throw ParseError(0, "empty file");
  if (tok.size() != 3) throw ParseError(reader.line(), "header must be 'num_nodes feature_dim num_classes'");
  const long long n = parse_int(tok[0], reader.line());
  const long long d = parse_int(tok[1], reader.line());
  const long long c = parse_int(tok[2], reader.line());
  if (n < 1 || d < 1 || c < 1) throw ParseError(reader.line(), "header counts must be positive");

  FullGraph g;
  g.num_nodes = static_cast<std::size_t>(n);
  g.features = Matrix(g.num_nodes, static_cast<std::size_t>(d));
  std::vector<long long> raw_labels(g.num_nodes);

  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    if (!reader.next(tok)) throw ParseError(reader.line(), "file ended before node row " + std::to_string(i));
    if (tok.size() != static_cast<std::size_t>(d) + 1)
      throw ParseError(reader.line(), "node row " + std::to_string(i) + " must hold a label and " +
                                          std::to_string(d) + " features, found " +
                                          std::to_string(tok.size()) + " fields");
    raw_labels[i] = parse_int(tok[0], reader.line());
    for (std::size_t j = 0; j < static_cast<std::size_t>(d); ++j)
      g.features(i, j) = parse_real(tok[j + 1], reader.line());
  }

  if (!reader.next(tok)) throw ParseError(reader.line(), "missing edge count line");
  if (tok.size() != 1) throw ParseError(reader.line(), "expected the edge count on its own line");
  const long long e = parse_int(tok[0], reader.line());
  if (e < 0) throw ParseError(reader.line(), "negative edge count");

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(static_cast<std::size_t>(e));
  for (long long k = 0; k < e; ++k) {
    if (!reader.next(tok)) throw ParseError(reader.line(), "file ended before edge " + std::to_string(k));
    if (tok.size() != 2) throw ParseError(reader.line(), "edge row must be 'u v'");
    const long long u = parse_int(tok[0], reader.line());
    const long long v = parse_int(tok[1], reader.line());
    if (u < 0 || v < 0 || u >= n || v >= n) throw ParseError(reader.line(), "edge endpoint out of range");
    edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
  }
  if (reader.next(tok)) throw ParseError(reader.line(), "trailing content after the edge list");

  std::vector<long long> distinct = raw_labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() != static_cast<std::size_t>(c))
    throw ParseError(1, "header declares " + std::to_string(c) + " classes but labels use " +
                            std::to_string(distinct.size()));
  const bool contiguous = distinct.front() == 0 && distinct.back() == c - 1;
  if (!contiguous && warnings)
    warnings->push_back("class ids are not 0.." + std::to_string(c - 1) +
                        "; remapped in ascending order");
  g.labels.resize(g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i)
    g.labels[i] = static_cast<ClassId>(
        std::lower_bound(distinct.begin(), distinct.end(), raw_labels[i]) - distinct.begin());
  g.class_set.resize(distinct.size());
  std::iota(g.class_set.begin(), g.class_set.end(), 0);

  g.adjacency = Csr::from_pairs(g.num_nodes, symmetrize(edges));
  g.validate();
  return g;
}

FullGraph load_graph(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());
  return parse_graph(in, warnings);
}

void write_graph(std::ostream& out, const FullGraph& g) {
  out << "# num_nodes feature_dim num_classes\n";
  out << g.num_nodes << ' ' << g.feature_dim() << ' ' << g.class_set.size() << '\n';
  char buf[32];
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    out << g.labels[i];
    for (double v : g.features.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ' ' << buf;
    }
    out << '\n';
  }
  out << g.num_edges() << '\n';
  for (std::size_t u = 0; u < g.num_nodes; ++u)
    for (std::size_t v : g.adjacency.neighbors(u))
      if (u < v) out << u << ' ' << v << '\n';
}

void save_graph(const std::filesystem::path& path, const FullGraph& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
  write_graph(out, g);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

FullGraph generate_sbm(const SbmParams& p) {
  if (p.classes < 1 || p.nodes_per_class < 1 || p.feature_dim < 1)
    throw std::invalid_argument("generate_sbm: counts must be >= 1");
  if (!(0.0 <= p.q_inter && p.q_inter <= p.p_intra && p.p_intra <= 1.0))
    throw std::invalid_argument("generate_sbm: need 0 <= q_inter <= p_intra <= 1");
  if (!(p.center_separation >= 0.0)) throw std::invalid_argument("generate_sbm: negative separation");

  Rng rng(derive_seed(p.seed, {0x5b3}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // Scaled basis vectors are exactly center_separation apart. With more
  // classes than dimensions, fall back to random points on a growing sphere.
  Matrix centers(p.classes, p.feature_dim);
  if (p.classes <= p.feature_dim) {
    for (std::size_t k = 0; k < p.classes; ++k) centers(k, k) = p.center_separation / std::sqrt(2.0);
  } else {
    double radius = p.center_separation;
    for (std::size_t k = 0; k < p.classes;) {
      double norm = 0.0;
      for (std::size_t j = 0; j < p.feature_dim; ++j) {
        centers(k, j) = normal(rng);
        norm += centers(k, j) * centers(k, j);
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < p.feature_dim; ++j) centers(k, j) *= radius / norm;
      bool ok = true;
      for (std::size_t m = 0; m < k && ok; ++m) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < p.feature_dim; ++j) {
          const double diff = centers(k, j) - centers(m, j);
          d2 += diff * diff;
        }
        ok = std::sqrt(d2) >= p.center_separation;
      }
      if (ok) {
        ++k;
      } else {
        radius *= 1.01;
      }
    }
  }

  FullGraph g;
  g.num_nodes = p.classes * p.nodes_per_class;
  g.features = Matrix(g.num_nodes, p.feature_dim);
  g.labels.resize(g.num_nodes);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    const auto k = i / p.nodes_per_class;
    g.labels[i] = static_cast<ClassId>(k);
    for (std::size_t j = 0; j < p.feature_dim; ++j) g.features(i, j) = centers(k, j) + normal(rng);
  }
  g.class_set.resize(p.classes);
  std::iota(g.class_set.begin(), g.class_set.end(), 0);

  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t u = 0; u < g.num_nodes; ++u)
    for (std::size_t v = u + 1; v < g.num_nodes; ++v) {
      const double prob = g.labels[u] == g.labels[v] ? p.p_intra : p.q_inter;
      if (unif(rng) < prob) edges.emplace_back(u, v);
    }
  g.adjacency = Csr::from_pairs(g.num_nodes, symmetrize(edges));
  g.validate();
  return g;
}

TaskSequence split_tasks(const FullGraph& graph, std::size_t base_class_count,
                         std::size_t classes_per_increment, std::uint64_t split_seed) {
  const std::size_t total = graph.class_set.size();
  if (base_class_count == 0 || classes_per_increment == 0)
    throw std::invalid_argument("split_tasks: class counts must be positive");
  if (base_class_count >= total || (total - base_class_count) % classes_per_increment != 0)
    throw std::invalid_argument("split_tasks: base + k*increment must equal the class count for some k >= 1");
  if (base_class_count < classes_per_increment)
    throw std::invalid_argument("split_tasks: the base task must hold at least as many classes as an increment");

  TaskSequence seq;
  seq.class_partition.emplace_back(graph.class_set.begin(), graph.class_set.begin() + base_class_count);
  for (std::size_t start = base_class_count; start < total; start += classes_per_increment)
    seq.class_partition.emplace_back(graph.class_set.begin() + start,
                                     graph.class_set.begin() + start + classes_per_increment);

  std::map<ClassId, std::size_t> task_of;
  for (std::size_t t = 0; t < seq.class_partition.size(); ++t)
    for (ClassId c : seq.class_partition[t]) task_of[c] = t;

  std::vector<std::size_t> local_index(graph.num_nodes);
  for (std::size_t t = 0; t < seq.class_partition.size(); ++t) {
    TaskGraph task;
    task.task_id = t;
    task.classes = seq.class_partition[t];
    for (std::size_t i = 0; i < graph.num_nodes; ++i)
      if (task_of.at(graph.labels[i]) == t) {
        local_index[i] = task.node_map.size();
        task.node_map.push_back(i);
      }

    const std::size_t n = task.node_map.size();
    task.features = Matrix(n, graph.feature_dim());
    task.labels.resize(n);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t li = 0; li < n; ++li) {
      const std::size_t gi = task.node_map[li];
      std::copy(graph.features.row(gi).begin(), graph.features.row(gi).end(), task.features.row(li).begin());
      task.labels[li] = graph.labels[gi];
      for (std::size_t gj : graph.adjacency.neighbors(gi))
        if (task_of.at(graph.labels[gj]) == t) edges.emplace_back(li, local_index[gj]);
    }
    task.adjacency = Csr::from_pairs(n, edges);

    for (ClassId c : task.classes) {
      std::vector<std::size_t> members;
      for (std::size_t li = 0; li < n; ++li)
        if (task.labels[li] == c) members.push_back(li);
      const std::size_t holdout = members.size() / 5;  // floor(0.2 n)
      if (holdout == 0)
        throw std::invalid_argument("split_tasks: class " + std::to_string(c) + " has " +
                                    std::to_string(members.size()) +
                                    " nodes, too few for a non-empty test split");
      Rng rng(derive_seed(split_seed, {0x5917, static_cast<std::uint64_t>(c)}));
      std::shuffle(members.begin(), members.end(), rng);
      task.val.insert(task.val.end(), members.begin(), members.begin() + holdout);
      task.test.insert(task.test.end(), members.begin() + holdout, members.begin() + 2 * holdout);
      task.train.insert(task.train.end(), members.begin() + 2 * holdout, members.end());
    }
    std::sort(task.train.begin(), task.train.end());
    std::sort(task.val.begin(), task.val.end());
    std::sort(task.test.begin(), task.test.end());
    seq.tasks.push_back(std::move(task));
  }
  return seq;
}

}  // namespace ipal::graph
