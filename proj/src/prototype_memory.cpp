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

#include "ipal/prototype_memory.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "ipal/nn.hpp"
#include "ipal/random.hpp"

namespace ipal::proto {

void MemoryBuffer::insert(ClassPrototype p) {
  const ClassId c = p.class_id;
  if (!prototypes_.emplace(c, std::move(p)).second)
    throw std::invalid_argument("MemoryBuffer: class " + std::to_string(c) + " already stored");
}

std::vector<ClassId> MemoryBuffer::classes() const {
  std::vector<ClassId> out;
  out.reserve(prototypes_.size());
  for (const auto& [c, _] : prototypes_) out.push_back(c);
  return out;
}

std::vector<double> unit(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  std::vector<double> out(v.begin(), v.end());
  if (s > 0.0) {
    const double n = std::sqrt(s);
    for (double& x : out) x /= n;
  }
  return out;
}

std::vector<ClassPrototype> weighted_prototypes(const Matrix& embeddings, std::span<const ClassId> labels,
                                                std::span<const std::size_t> nodes,
                                                std::span<const double> weights,
                                                std::span<const ClassId> class_set, std::size_t source_task,
                                                bool normalize_mean) {
  if (labels.size() != embeddings.rows) throw std::invalid_argument("prototypes: one label per embedding row required");
  if (!weights.empty() && weights.size() != embeddings.rows)
    throw std::invalid_argument("prototypes: weights must align with embedding rows");
  const std::size_t d = embeddings.cols;
  auto weight = [&](std::size_t x) { return weights.empty() ? 1.0 : weights[x]; };

  std::vector<ClassPrototype> out;
  out.reserve(class_set.size());
  for (ClassId k : class_set) {
    ClassPrototype p;
    p.class_id = k;
    p.source_task = source_task;
    p.mean.assign(d, 0.0);
    p.diag_variance.assign(d, 0.0);
    std::size_t members = 0;
    for (std::size_t x : nodes) {
      if (labels[x] != k) continue;
      const double w = weight(x);
      p.rank_mass += w;
      for (std::size_t j = 0; j < d; ++j) p.mean[j] += w * embeddings(x, j);
      ++members;
    }
    if (members == 0) throw std::invalid_argument("prototypes: class " + std::to_string(k) + " has no nodes");
    for (double& v : p.mean) v /= p.rank_mass;
    if (members > 1) {
      for (std::size_t x : nodes) {
        if (labels[x] != k) continue;
        const double w = weight(x);
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = embeddings(x, j) - p.mean[j];
          p.diag_variance[j] += w * diff * diff;
        }
      }
      for (double& v : p.diag_variance) v /= p.rank_mass;
    }
    if (normalize_mean) p.mean = unit(p.mean);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<ClassPrototype> compute_tigp(const Matrix& embeddings, std::span<const ClassId> labels,
                                         std::span<const std::size_t> nodes, std::span<const double> pagerank,
                                         std::span<const ClassId> class_set, std::size_t source_task,
                                         bool normalize_mean) {
  if (pagerank.size() != embeddings.rows) throw std::invalid_argument("compute_tigp: scores must align with embeddings");
  return weighted_prototypes(embeddings, labels, nodes, pagerank, class_set, source_task, normalize_mean);
}

std::vector<ClassPrototype> compute_mean_prototypes(const Matrix& embeddings, std::span<const ClassId> labels,
                                                    std::span<const std::size_t> nodes,
                                                    std::span<const ClassId> class_set, std::size_t source_task,
                                                    bool normalize_mean) {
  return weighted_prototypes(embeddings, labels, nodes, {}, class_set, source_task, normalize_mean);
}

std::vector<ClassPrototype> update_online_prototypes(const Matrix& embeddings, std::span<const ClassId> labels,
                                                     std::span<const std::size_t> nodes,
                                                     std::span<const double> pagerank,
                                                     std::span<const ClassId> current_classes) {
  auto out = weighted_prototypes(embeddings, labels, nodes, pagerank, current_classes, 0, false);
  for (auto& p : out) p.diag_variance.clear();
  return out;
}

Matrix sample_replay(const ClassPrototype& prototype, std::size_t k, std::uint64_t seed, bool normalize) {
  if (k == 0) throw std::invalid_argument("sample_replay: k must be >= 1");
  const std::size_t d = prototype.mean.size();
  if (prototype.diag_variance.size() != d) throw std::invalid_argument("sample_replay: prototype has no variance");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      out(i, j) = prototype.mean[j] + std::sqrt(prototype.diag_variance[j]) * normal(rng);
    if (normalize) {
      const auto u = unit(out.row(i));
      std::copy(u.begin(), u.end(), out.row(i).begin());
    }
  }
  return out;
}

CompensationReport compensate_drift(MemoryBuffer& buffer, const Matrix& old_embeddings,
                                    const Matrix& new_embeddings, double beta, bool normalize_mean) {
  if (!old_embeddings.same_shape(new_embeddings))
    throw std::invalid_argument("compensate_drift: old/new embeddings must be row-aligned");
  const std::size_t n = old_embeddings.rows;
  const std::size_t d = old_embeddings.cols;
  CompensationReport report;
  for (ClassId c : buffer.classes()) {
    ClassPrototype& p = buffer.at(c);
    if (p.mean.size() != d) throw std::invalid_argument("compensate_drift: prototype dimension mismatch");
    std::vector<double> sim(n);
    double denom = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += old_embeddings(x, j) * p.mean[j];
      sim[x] = s;
      denom += s;
    }
    if (std::fabs(denom) < 1e-8) {
      report.skipped.push_back(c);
      continue;
    }
    std::vector<double> shift(d, 0.0);
    for (std::size_t x = 0; x < n; ++x) {
      sim[x] /= denom;
      for (std::size_t j = 0; j < d; ++j) shift[j] += sim[x] * (new_embeddings(x, j) - old_embeddings(x, j));
    }
    bool moved = false;
    for (std::size_t j = 0; j < d; ++j) {
      p.mean[j] += beta * shift[j];
      moved = moved || beta * shift[j] != 0.0;
    }
    // Renormalizing an unmoved unit vector could still change its last bits.
    if (normalize_mean && moved) p.mean = unit(p.mean);
    report.weights.emplace(c, std::move(sim));
  }
  return report;
}

void write_buffer(std::ostream& out, const MemoryBuffer& buffer) {
  out << "ipal-buffer 1\n" << buffer.size() << '\n';
  for (const auto& [c, p] : buffer.entries()) {
    out << c << ' ' << p.source_task << ' ' << nn::encode_double(p.rank_mass) << ' ' << p.mean.size() << '\n';
    for (std::size_t j = 0; j < p.mean.size(); ++j) out << (j ? " " : "") << nn::encode_double(p.mean[j]);
    out << '\n';
    for (std::size_t j = 0; j < p.diag_variance.size(); ++j)
      out << (j ? " " : "") << nn::encode_double(p.diag_variance[j]);
    out << '\n';
  }
}

MemoryBuffer read_buffer(std::istream& in) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != "ipal-buffer") throw std::runtime_error("read_buffer: not a buffer checkpoint");
  if (version != 1) throw std::runtime_error("read_buffer: unsupported version " + std::to_string(version));
  if (!(in >> count)) throw std::runtime_error("read_buffer: missing class count");
  MemoryBuffer buffer;
  for (std::size_t i = 0; i < count; ++i) {
    ClassPrototype p;
    std::string mass;
    std::size_t dim = 0;
    if (!(in >> p.class_id >> p.source_task >> mass >> dim)) throw std::runtime_error("read_buffer: truncated record");
    p.rank_mass = nn::decode_double(mass);
    p.mean.resize(dim);
    p.diag_variance.resize(dim);
    std::string tok;
    for (double& v : p.mean) {
      if (!(in >> tok)) throw std::runtime_error("read_buffer: truncated mean");
      v = nn::decode_double(tok);
    }
    for (double& v : p.diag_variance) {
      if (!(in >> tok)) throw std::runtime_error("read_buffer: truncated variance");
      v = nn::decode_double(tok);
    }
    buffer.insert(std::move(p));
  }
  return buffer;
}

}  // namespace ipal::proto
