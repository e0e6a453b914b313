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
#include <optional>
#include <string>
#include <vector>

#include "ipal/evaluation.hpp"
#include "ipal/graph_store.hpp"
#include "ipal/nn.hpp"
#include "ipal/objectives.hpp"
#include "ipal/prototype_memory.hpp"

namespace ipal::train {

using graph::ClassId;

enum class Method {
  IPAL,
  BARE,
  PR,
  PR_FD,
  IPAL_MEAN_PROTO,
  IPAL_NO_IPAD,
  IPAL_FD,
  IPAL_NO_DBP,
  PCL,  // plain prototype contrastive loss, nothing else
};

std::string to_string(Method m);
/// Case-insensitive; throws std::invalid_argument on an unknown name.
Method parse_method(const std::string& name);
const std::vector<Method>& all_methods();

enum class Distill { kNone, kIpad, kFeature };

/// Which loss terms and bookkeeping steps a method uses.
struct MethodTerms {
  bool classifier = false;     // linear head + cross-entropy instead of prototype contrast
  bool replay = false;         // Gaussian replay draws from the buffer
  bool tigp = false;           // PageRank-weighted prototypes (else plain means)
  bool dbp = false;            // entropy-selected hard negatives
  Distill distill = Distill::kNone;
  bool compensation = false;   // post-task drift compensation of stored means
  bool stores_prototypes = true;
};

MethodTerms terms_of(Method m);

struct TrainConfig {
  Method method = Method::IPAL;
  double gamma = 0.5;
  double tau = 0.07;
  double alpha_damping = 0.85;
  double beta_comp = 0.1;
  std::size_t subset_size = 100;
  std::size_t k = 10;
  std::size_t epochs = 200;      // base task
  std::size_t epochs_inc = 100;  // each incremental task
  double lr_base = 1e-3;
  double lr_inc = 1e-4;
  std::uint64_t seed = 0;
  bool normalize = true;
  bool classifier_bias = true;
  std::size_t patience = 0;      // 0 disables early stopping

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochLog {
  std::size_t task = 0;
  std::size_t epoch = 0;
  loss::LossBreakdown breakdown;
  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

/// Everything that survives from one task to the next. Holds no per-node data.
struct TrainerState {
  nn::GcnEncoder encoder;
  nn::LinearClassifier classifier;  // only used by classifier methods
  proto::MemoryBuffer buffer;
  std::vector<ClassId> seen_classes;
  std::size_t tasks_done = 0;
};

/// Serialized inter-task state: encoder, classifier and buffer checkpoints.
void write_state(std::ostream& out, const TrainerState& state);
std::size_t state_size(const TrainerState& state);
/// Size of `state` serialized with every stored number replaced by zero.
std::size_t shape_only_state_size(const TrainerState& state);

class ContinualTrainer {
 public:
  ContinualTrainer(const TrainConfig& config, std::size_t feature_dim);

  /// Trains on the next task of the sequence. Throws std::invalid_argument if
  /// the task reuses an already seen class.
  void train_task(const graph::TaskGraph& task);

  /// Labels for every node of `task` over all seen classes. Ties go to the
  /// lowest class id.
  std::vector<ClassId> predict(const graph::TaskGraph& task) const;

  const TrainerState& state() const { return state_; }
  const TrainConfig& config() const { return config_; }
  /// Copy of the previous encoder, alive only while a task is being trained.
  const std::optional<nn::GcnEncoder>& frozen_encoder() const { return frozen_; }

  std::function<void(const EpochLog&)> on_epoch;
  /// Called after every epoch with the frozen encoder still in place.
  std::function<void(const ContinualTrainer&)> on_epoch_state;

 private:
  struct Snapshot;
  double validation_accuracy(const graph::TaskGraph& task, const nn::PreparedGraph& prepared,
                             const std::vector<proto::ClassPrototype>& online) const;
  std::vector<ClassId> predict_from(const Matrix& emb, const proto::MemoryBuffer& buffer,
                                    const std::vector<proto::ClassPrototype>& extra) const;

  TrainConfig config_;
  MethodTerms terms_;
  TrainerState state_;
  std::optional<nn::GcnEncoder> frozen_;
};

struct RunRecord {
  TrainConfig config;
  eval::PerformanceMatrix test_matrix;
  eval::PerformanceMatrix val_matrix;
  eval::DriftReport drift;            // base-class drift after every incremental task
  std::vector<EpochLog> epochs;
  std::vector<double> seconds_per_task;  // wall clock, not part of the deterministic output
  std::vector<std::size_t> state_bytes;  // serialized state size after each task
  /// True when every serialized state had exactly the size of a zero-filled
  /// state with the same shapes, i.e. no size contribution from node data.
  bool state_audit_passed = true;
  std::optional<TrainerState> final_state;
};

struct RunOptions {
  /// When set, per-task checkpoints (encoder, classifier, buffer) go here.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(const EpochLog&)> on_epoch;
};

RunRecord run_sequence(const graph::TaskSequence& sequence, const TrainConfig& config,
                       const RunOptions& options = {});

}  // namespace ipal::train
