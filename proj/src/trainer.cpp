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

#include "ipal/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ipal/random.hpp"
#include "ipal/ranking.hpp"

namespace ipal::train {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kSeedEncoder = 0x11;
constexpr std::uint64_t kSeedClassifier = 0x12;
constexpr std::uint64_t kSeedReplay = 0x21;
constexpr std::uint64_t kSeedIpad = 0x22;

struct MethodName {
  Method method;
  const char* name;
};

constexpr MethodName kNames[] = {
    {Method::IPAL, "IPAL"},
    {Method::BARE, "BARE"},
    {Method::PR, "PR"},
    {Method::PR_FD, "PR_FD"},
    {Method::IPAL_MEAN_PROTO, "IPAL_MEAN_PROTO"},
    {Method::IPAL_NO_IPAD, "IPAL_NO_IPAD"},
    {Method::IPAL_FD, "IPAL_FD"},
    {Method::IPAL_NO_DBP, "IPAL_NO_DBP"},
    {Method::PCL, "PCL"},
};

Matrix gather(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& n : kNames)
    if (n.method == m) return n.name;
  throw std::invalid_argument("unknown method");
}

Method parse_method(const std::string& name) {
  std::string upper;
  for (char ch : name) upper += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (const auto& n : kNames)
    if (upper == n.name) return n.method;
  throw std::invalid_argument("unknown method '" + name + "'");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods = [] {
    std::vector<Method> v;
    for (const auto& n : kNames) v.push_back(n.method);
    return v;
  }();
  return methods;
}

MethodTerms terms_of(Method m) {
  MethodTerms t;
  switch (m) {
    case Method::BARE:
      t.classifier = true;
      t.stores_prototypes = false;
      break;
    case Method::PR:
      t.classifier = true;
      t.replay = true;
      break;
    case Method::PR_FD:
      t.classifier = true;
      t.replay = true;
      t.distill = Distill::kFeature;
      break;
    case Method::PCL:
      break;
    case Method::IPAL:
    case Method::IPAL_MEAN_PROTO:
    case Method::IPAL_NO_IPAD:
    case Method::IPAL_FD:
    case Method::IPAL_NO_DBP:
      t.replay = true;
      t.tigp = m != Method::IPAL_MEAN_PROTO;
      t.dbp = m != Method::IPAL_NO_DBP;
      t.distill = m == Method::IPAL_NO_IPAD ? Distill::kNone
                  : m == Method::IPAL_FD    ? Distill::kFeature
                                            : Distill::kIpad;
      t.compensation = true;
      break;
  }
  return t;
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in [0, 1]");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(alpha_damping >= 0.0 && alpha_damping < 1.0)) throw std::invalid_argument("alpha_damping must be in [0, 1)");
  if (!(beta_comp >= 0.0)) throw std::invalid_argument("beta_comp must be non-negative");
  if (!(lr_base > 0.0) || !(lr_inc > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (k == 0) throw std::invalid_argument("k must be >= 1");
  if (subset_size == 0) throw std::invalid_argument("subset_size must be >= 1");
}

void write_state(std::ostream& out, const TrainerState& state) {
  nn::write_parameters(out, state.encoder.parameters());
  nn::write_parameters(out, state.classifier.parameters());
  proto::write_buffer(out, state.buffer);
}

std::size_t state_size(const TrainerState& state) {
  std::ostringstream out;
  write_state(out, state);
  return out.str().size();
}

std::size_t shape_only_state_size(const TrainerState& state) {
  TrainerState zero = state;
  auto clear = [](ad::Parameter* p) {
    std::fill(p->value.data.begin(), p->value.data.end(), 0.0);
    p->zero_grad();
  };
  for (auto* p : zero.encoder.parameters()) clear(p);
  for (auto* p : zero.classifier.parameters()) clear(p);
  for (ClassId c : zero.buffer.classes()) {
    auto& proto = zero.buffer.at(c);
    std::fill(proto.mean.begin(), proto.mean.end(), 0.0);
    std::fill(proto.diag_variance.begin(), proto.diag_variance.end(), 0.0);
    proto.rank_mass = 0.0;
  }
  return state_size(zero);
}

struct ContinualTrainer::Snapshot {
  nn::GcnEncoder encoder;
  nn::LinearClassifier classifier;
};

ContinualTrainer::ContinualTrainer(const TrainConfig& config, std::size_t feature_dim)
    : config_(config), terms_(terms_of(config.method)) {
  config_.validate();
  state_.encoder = nn::GcnEncoder(feature_dim, derive_seed(config_.seed, {kSeedEncoder}), config_.normalize);
  state_.classifier = nn::LinearClassifier(nn::GcnEncoder::kHidden, config_.classifier_bias);
}

void ContinualTrainer::train_task(const graph::TaskGraph& task) {
  for (ClassId c : task.classes)
    if (std::find(state_.seen_classes.begin(), state_.seen_classes.end(), c) != state_.seen_classes.end())
      throw std::invalid_argument("train_task: class " + std::to_string(c) + " was already learned");
  if (task.train.empty()) throw std::invalid_argument("train_task: task has no training nodes");

  const std::size_t t = state_.tasks_done;
  const bool base = t == 0;
  const auto prepared = nn::PreparedGraph::from(task);
  const std::vector<double> rank =
      terms_.tigp ? rank::pagerank(task.adjacency, config_.alpha_damping).scores : std::vector<double>{};

  if (terms_.classifier) state_.classifier.grow(task.classes, derive_seed(config_.seed, {kSeedClassifier, t}));

  Matrix old_emb;
  if (!base) {
    frozen_ = state_.encoder;
    old_emb = frozen_->embed(prepared);
  }

  std::vector<ad::Parameter*> params = state_.encoder.parameters();
  if (terms_.classifier)
    for (auto* p : state_.classifier.parameters()) params.push_back(p);
  nn::Adam opt(params, base ? config_.lr_base : config_.lr_inc);
  const std::size_t epochs = base ? config_.epochs : config_.epochs_inc;
  const std::size_t replay_k = terms_.replay ? config_.k : 0;
  const proto::MemoryBuffer& buffer = state_.buffer;

  double best_val = -1.0;
  std::size_t since_best = 0;
  std::optional<Snapshot> best;
  std::vector<proto::ClassPrototype> online;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    ad::Tape tape;
    ad::Var emb = state_.encoder.encode(tape, prepared);
    const Matrix& e = emb.value();
    const std::uint64_t replay_seed = derive_seed(config_.seed, {kSeedReplay, t, epoch});
    loss::LossBreakdown extra;

    ad::Var contrast;
    if (terms_.classifier) {
      contrast = loss::pr_baseline_loss(emb, task.labels, task.train, state_.classifier, buffer, replay_k,
                                        replay_seed, config_.normalize);
    } else {
      online = proto::update_online_prototypes(e, task.labels, task.train, rank, task.classes);
      loss::HardExampleSet hard;
      if (terms_.dbp) {
        const auto table = loss::PrototypeTable::build(online, buffer, config_.normalize);
        hard = loss::select_hard_examples(e, task.labels, task.train, table.means, task.classes, config_.k);
      }
      extra.num_hard_negatives_used = hard.size();
      contrast = loss::pcl_dbp_loss(emb, task.labels, task.train, online, buffer, hard, replay_k, config_.tau,
                                    replay_seed, config_.normalize);
    }

    ad::Var distill;
    if (!base && terms_.distill == Distill::kIpad) {
      auto r = loss::ipad_loss(old_emb, emb, task.train, buffer, config_.subset_size,
                               derive_seed(config_.seed, {kSeedIpad, t, epoch}), config_.normalize);
      distill = r.loss;
      extra.num_mixup_kept = r.kept.size();
      extra.num_mixup_filtered = r.filtered;
    } else if (!base && terms_.distill == Distill::kFeature) {
      distill = loss::fd_baseline_loss(old_emb, emb, task.train);
    }

    auto obj = loss::total_loss(contrast, distill, config_.gamma, base);
    obj.breakdown.num_hard_negatives_used = extra.num_hard_negatives_used;
    obj.breakdown.num_mixup_kept = extra.num_mixup_kept;
    obj.breakdown.num_mixup_filtered = extra.num_mixup_filtered;

    opt.zero_grad();
    tape.backward(obj.total);
    opt.step();

    if (on_epoch) on_epoch({t, epoch, obj.breakdown});
    if (on_epoch_state) on_epoch_state(*this);

    if (config_.patience > 0 && !task.val.empty()) {
      if (!terms_.classifier)
        online = proto::update_online_prototypes(state_.encoder.embed(prepared), task.labels, task.train, rank,
                                                 task.classes);
      const double val = validation_accuracy(task, prepared, online);
      if (val > best_val) {
        best_val = val;
        since_best = 0;
        best = Snapshot{state_.encoder, state_.classifier};
      } else if (++since_best >= config_.patience) {
        break;
      }
    }
  }
  if (best) {
    state_.encoder = best->encoder;
    state_.classifier = best->classifier;
  }

  const Matrix new_emb = state_.encoder.embed(prepared);
  if (!base && terms_.compensation)
    proto::compensate_drift(state_.buffer, gather(old_emb, task.train), gather(new_emb, task.train),
                            config_.beta_comp, config_.normalize);

  if (terms_.stores_prototypes) {
    auto protos = terms_.tigp ? proto::compute_tigp(new_emb, task.labels, task.train, rank, task.classes, t,
                                                    config_.normalize)
                              : proto::compute_mean_prototypes(new_emb, task.labels, task.train, task.classes, t,
                                                               config_.normalize);
    for (auto& p : protos) state_.buffer.insert(std::move(p));
  }
  state_.seen_classes.insert(state_.seen_classes.end(), task.classes.begin(), task.classes.end());
  state_.tasks_done += 1;
  frozen_.reset();
}

double ContinualTrainer::validation_accuracy(const graph::TaskGraph& task, const nn::PreparedGraph& prepared,
                                             const std::vector<proto::ClassPrototype>& online) const {
  const Matrix emb = state_.encoder.embed(prepared);
  return eval::accuracy(predict_from(emb, state_.buffer, online), task.labels, task.val);
}

std::vector<ClassId> ContinualTrainer::predict_from(const Matrix& emb, const proto::MemoryBuffer& buffer,
                                                    const std::vector<proto::ClassPrototype>& extra) const {
  std::vector<ClassId> out(emb.rows);
  if (terms_.classifier) {
    const Matrix logits = state_.classifier.logits(emb);
    const auto& classes = state_.classifier.classes();
    for (std::size_t x = 0; x < emb.rows; ++x) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < classes.size(); ++j) {
        const double a = logits(x, j), b = logits(x, best);
        if (a > b || (a == b && classes[j] < classes[best])) best = j;
      }
      out[x] = classes[best];
    }
    return out;
  }

  std::map<ClassId, std::vector<double>> means;
  for (const auto& [c, p] : buffer.entries()) means.emplace(c, p.mean);
  for (const auto& p : extra) means.emplace(p.class_id, p.mean);
  if (means.empty()) throw std::logic_error("predict: no prototypes");
  if (config_.normalize)
    for (auto& [_, m] : means) m = proto::unit(m);
  for (std::size_t x = 0; x < emb.rows; ++x) {
    auto f = emb.row(x);
    double best_score = -std::numeric_limits<double>::infinity();
    ClassId best = means.begin()->first;
    for (const auto& [c, m] : means) {
      double s = 0.0;
      for (std::size_t j = 0; j < m.size(); ++j) s += f[j] * m[j];
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    out[x] = best;
  }
  return out;
}

std::vector<ClassId> ContinualTrainer::predict(const graph::TaskGraph& task) const {
  const auto prepared = nn::PreparedGraph::from(task);
  return predict_from(state_.encoder.embed(prepared), state_.buffer, {});
}

RunRecord run_sequence(const graph::TaskSequence& sequence, const TrainConfig& config, const RunOptions& options) {
  if (sequence.tasks.empty()) throw std::invalid_argument("run_sequence: empty task sequence");
  RunRecord record;
  record.config = config;
  ContinualTrainer trainer(config, sequence.tasks.front().features.cols);
  trainer.on_epoch = [&](const EpochLog& log) {
    record.epochs.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
  };
  if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

  const auto& base_task = sequence.tasks.front();
  const auto base_prepared = nn::PreparedGraph::from(base_task);
  Matrix base_reference;

  for (std::size_t t = 0; t < sequence.tasks.size(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    trainer.train_task(sequence.tasks[t]);
    record.seconds_per_task.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());

    std::vector<double> test_row, val_row;
    for (std::size_t i = 0; i <= t; ++i) {
      const auto& task = sequence.tasks[i];
      const auto predicted = trainer.predict(task);
      test_row.push_back(eval::accuracy(predicted, task.labels, task.test));
      val_row.push_back(eval::accuracy(predicted, task.labels, task.val));
    }
    record.test_matrix.append_row(std::move(test_row));
    record.val_matrix.append_row(std::move(val_row));

    // Drift is measured by the harness on retained base-task data; the
    // trainer itself never sees it again.
    const Matrix base_now = trainer.state().encoder.embed(base_prepared);
    if (t == 0) {
      base_reference = base_now;
    } else {
      auto report = eval::measure_drift(base_reference, base_now, base_task.labels, base_task.train,
                                        base_task.classes, t);
      record.drift.entries.insert(record.drift.entries.end(), report.entries.begin(), report.entries.end());
    }

    std::ostringstream state_bytes;
    write_state(state_bytes, trainer.state());
    record.state_bytes.push_back(state_bytes.str().size());
    if (record.state_bytes.back() != shape_only_state_size(trainer.state())) record.state_audit_passed = false;

    if (options.checkpoint_dir) {
      std::ofstream out(*options.checkpoint_dir / ("task_" + std::to_string(t) + ".state"));
      out << state_bytes.str();
      if (!out) throw std::runtime_error("run_sequence: cannot write checkpoint");
    }
  }
  record.final_state = trainer.state();
  return record;
}

}  // namespace ipal::train
