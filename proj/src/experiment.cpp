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

#include "ipal/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ipal::exp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || t.empty())
    throw std::invalid_argument("not a non-negative integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

template <typename Member>
Field real_field(std::string section, std::string key, std::string help, Member member) {
  return {section, key, help,
          [member](const ExperimentSpec& s) { return format_double(member(s)); },
          [member](ExperimentSpec& s, const std::string& v) { member(s) = to_double(v); }};
}

template <typename Member>
Field count_field(std::string section, std::string key, std::string help, Member member) {
  return {section, key, help,
          [member](const ExperimentSpec& s) { return std::to_string(member(s)); },
          [member](ExperimentSpec& s, const std::string& v) {
            member(s) = static_cast<std::remove_reference_t<decltype(member(s))>>(to_u64(v));
          }};
}

template <typename Member>
Field bool_field(std::string section, std::string key, std::string help, Member member) {
  return {section, key, help,
          [member](const ExperimentSpec& s) { return from_bool(member(s)); },
          [member](ExperimentSpec& s, const std::string& v) { member(s) = to_bool(v); }};
}

std::vector<Field> make_fields() {
  std::vector<Field> f;
  // [dataset]
  f.push_back({"dataset", "path", "graph file to load instead of generating one",
               [](const ExperimentSpec& s) { return s.dataset.path; },
               [](ExperimentSpec& s, const std::string& v) { s.dataset.path = trim(v); }});
  f.push_back(count_field("dataset", "classes", "SBM class count", [](auto& s) -> auto& { return s.dataset.sbm.classes; }));
  f.push_back(count_field("dataset", "nodes_per_class", "SBM nodes per class",
                          [](auto& s) -> auto& { return s.dataset.sbm.nodes_per_class; }));
  f.push_back(real_field("dataset", "p_intra", "SBM intra-class edge probability",
                         [](auto& s) -> auto& { return s.dataset.sbm.p_intra; }));
  f.push_back(real_field("dataset", "q_inter", "SBM inter-class edge probability",
                         [](auto& s) -> auto& { return s.dataset.sbm.q_inter; }));
  f.push_back(count_field("dataset", "feature_dim", "SBM feature dimension",
                          [](auto& s) -> auto& { return s.dataset.sbm.feature_dim; }));
  f.push_back(real_field("dataset", "center_separation", "distance between class feature centers",
                         [](auto& s) -> auto& { return s.dataset.sbm.center_separation; }));
  f.push_back(count_field("dataset", "graph_seed", "SBM generator seed",
                          [](auto& s) -> auto& { return s.dataset.sbm.seed; }));
  // [split]
  f.push_back(count_field("split", "base_classes", "classes in the base task",
                          [](auto& s) -> auto& { return s.split.base_classes; }));
  f.push_back(count_field("split", "classes_per_increment", "classes per incremental task",
                          [](auto& s) -> auto& { return s.split.classes_per_increment; }));
  f.push_back(count_field("split", "split_seed", "train/val/test split seed",
                          [](auto& s) -> auto& { return s.split.split_seed; }));
  // [train]
  f.push_back({"train", "method", "IPAL, BARE, PR, PR_FD, IPAL_MEAN_PROTO, IPAL_NO_IPAD, IPAL_FD, IPAL_NO_DBP or PCL",
               [](const ExperimentSpec& s) { return train::to_string(s.train.method); },
               [](ExperimentSpec& s, const std::string& v) { s.train.method = train::parse_method(trim(v)); }});
  f.push_back(real_field("train", "gamma", "distillation weight", [](auto& s) -> auto& { return s.train.gamma; }));
  f.push_back(real_field("train", "tau", "contrastive temperature", [](auto& s) -> auto& { return s.train.tau; }));
  f.push_back(real_field("train", "alpha_damping", "PageRank damping",
                         [](auto& s) -> auto& { return s.train.alpha_damping; }));
  f.push_back(real_field("train", "beta_comp", "drift compensation strength",
                         [](auto& s) -> auto& { return s.train.beta_comp; }));
  f.push_back(count_field("train", "subset_size", "nodes mixed per epoch for distillation",
                          [](auto& s) -> auto& { return s.train.subset_size; }));
  f.push_back(count_field("train", "k", "hard examples per class and replay draws per stored class",
                          [](auto& s) -> auto& { return s.train.k; }));
  f.push_back(count_field("train", "epochs", "epochs on the base task", [](auto& s) -> auto& { return s.train.epochs; }));
  f.push_back(count_field("train", "epochs_inc", "epochs on each incremental task",
                          [](auto& s) -> auto& { return s.train.epochs_inc; }));
  f.push_back(real_field("train", "lr_base", "base task learning rate", [](auto& s) -> auto& { return s.train.lr_base; }));
  f.push_back(real_field("train", "lr_inc", "incremental task learning rate",
                         [](auto& s) -> auto& { return s.train.lr_inc; }));
  f.push_back(bool_field("train", "normalize", "L2-normalize embeddings and prototypes",
                         [](auto& s) -> auto& { return s.train.normalize; }));
  f.push_back(bool_field("train", "classifier_bias", "bias in the linear head",
                         [](auto& s) -> auto& { return s.train.classifier_bias; }));
  f.push_back(count_field("train", "patience", "early-stopping patience in epochs, 0 = off",
                          [](auto& s) -> auto& { return s.train.patience; }));
  // [run]
  f.push_back({"run", "seeds", "comma-separated training seeds",
               [](const ExperimentSpec& s) {
                 std::string out;
                 for (std::size_t i = 0; i < s.seeds.size(); ++i) out += (i ? "," : "") + std::to_string(s.seeds[i]);
                 return out;
               },
               [](ExperimentSpec& s, const std::string& v) { s.seeds = parse_seed_list(v); }});
  f.push_back(count_field("run", "jobs", "seeds trained in parallel", [](auto& s) -> auto& { return s.jobs; }));
  f.push_back(bool_field("run", "dump_embeddings", "write final embeddings of every task",
                         [](auto& s) -> auto& { return s.dump_embeddings; }));
  f.push_back(bool_field("run", "checkpoints", "write the state after every task",
                         [](auto& s) -> auto& { return s.checkpoints; }));
  return f;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u64(item));
  if (out.empty()) throw std::invalid_argument("seed list is empty");
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(item));
  if (out.empty()) throw std::invalid_argument("list is empty");
  return out;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = make_fields();
  return table;
}

void set_field(ExperimentSpec& spec, const std::string& section, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) {
      try {
        f.set(spec, value);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(section + "." + key + ": " + e.what());
      }
      return;
    }
  }
  throw std::invalid_argument("unknown config key " + section + "." + key);
}

void ExperimentSpec::validate() const {
  train.validate();
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (jobs == 0) throw std::invalid_argument("jobs must be >= 1");
  if (split.base_classes == 0 || split.classes_per_increment == 0)
    throw std::invalid_argument("split sizes must be positive");
  if (!dataset.path.empty() && !std::filesystem::exists(dataset.path))
    throw std::invalid_argument("dataset file not found: " + dataset.path);
}

ExperimentSpec read_spec(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  ExperimentSpec spec;
  for (const auto& [section, body] : tree) {
    if (section == "metrics") continue;
    if (body.empty() && !body.data().empty())
      throw std::invalid_argument("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) set_field(spec, section, key, value.data());
  }
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  return read_spec(in);
}

void write_spec(std::ostream& out, const ExperimentSpec& spec) {
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(spec) << '\n';
  }
}

graph::FullGraph load_dataset(const ExperimentSpec& spec) {
  if (!spec.dataset.path.empty()) return graph::load_graph(spec.dataset.path);
  return graph::generate_sbm(spec.dataset.sbm);
}

graph::TaskSequence build_sequence(const ExperimentSpec& spec) {
  return graph::split_tasks(load_dataset(spec), spec.split.base_classes, spec.split.classes_per_increment,
                            spec.split.split_seed);
}

std::filesystem::path default_output_root() {
  const char* env = std::getenv("IPAL_OUTPUT_ROOT");
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("runs");
}

}  // namespace ipal::exp
