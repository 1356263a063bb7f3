// Copyright 2026 The StepGAN Workbench Authors.
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

// Experiment configuration: flat `section.key=value` lines, '#' comments.
// Every key has a default, so an empty file is a valid configuration; the
// snapshot written into a run directory lists every key explicitly.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/checkpoint.hpp"
#include "stepgan/counting_task.hpp"
#include "stepgan/credit_assignment.hpp"
#include "stepgan/evaluation.hpp"
#include "stepgan/training.hpp"

namespace stepgan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  // data
  std::string data_dir;  // empty: generate from data_seed / sizes in memory
  std::uint64_t data_seed = 0;
  DatasetSizes sizes;
  int nmax = kDefaultMaxInputLength;

  // model
  ModelConfig model;
  std::string scalar = "float32";

  // strategy; "auto" picks the strategy's default
  std::string strategy_kind = "stepgan_w";
  int rollouts = 5;
  std::string alpha = "auto";
  double alpha_offset = 0.0;
  std::string baseline = "auto";

  // training
  TrainingConfig train;
  long mle_seed = -1;  // -1: the run seed
  long snapshot_interval = 500;

  // evaluation
  EvalOptions eval;
  std::size_t eval_examples = 0;      // 0: the whole split
  std::size_t snapshot_examples = 1000;  // intermediate snapshots
  std::string eval_split = "test";

  // run
  std::string output = "runs";
  std::vector<long> seeds{1};
  std::string pretrained;  // shared MLE checkpoint, created on first use; "{seed}" expands to the MLE seed

  StrategyConfig strategy() const {
    StrategyKind kind;
    try {
      kind = parse_strategy(strategy_kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    StrategyConfig s = StrategyConfig::defaults(kind);
    s.rollouts = rollouts;
    s.alpha_offset = alpha_offset;
    if (alpha == "uniform") {
      s.alpha = AlphaSchedule::kUniform;
    } else if (alpha == "decaying") {
      s.alpha = AlphaSchedule::kDecaying;
    } else if (alpha != "auto") {
      throw ConfigError("strategy.alpha must be auto, uniform or decaying");
    }
    if (baseline == "on") {
      s.baseline_enabled = true;
    } else if (baseline == "off") {
      s.baseline_enabled = false;
    } else if (baseline != "auto") {
      throw ConfigError("strategy.baseline must be auto, on or off");
    }
    return s;
  }

  long mle_seed_for(long seed) const { return mle_seed >= 0 ? mle_seed : seed; }

  /// run.pretrained with "{seed}" replaced by the MLE seed of `seed`.
  std::string pretrained_path(long seed) const {
    std::string p = pretrained;
    const std::string tag = "{seed}";
    for (auto at = p.find(tag); at != std::string::npos; at = p.find(tag)) {
      p.replace(at, tag.size(), std::to_string(mle_seed_for(seed)));
    }
    return p;
  }

  TrainingConfig training(long seed) const {
    TrainingConfig t = train;
    t.seed = static_cast<std::uint64_t>(seed);
    return t;
  }

  void validate() const {
    try {
      model.validate();
      train.validate();
      strategy().validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (scalar != "float32" && scalar != "float64") throw ConfigError("model.scalar must be float32 or float64");
    if (sizes.train == 0 || sizes.valid == 0 || sizes.test == 0) throw ConfigError("data sizes must be positive");
    if (nmax < 1 || nmax > vocab::kDigits) throw ConfigError("data.nmax must be in 1..10");
    if (eval.samples < 1) throw ConfigError("eval.samples must be >= 1");
    if (!(eval.epsilon > 0.0)) throw ConfigError("eval.epsilon must be positive");
    if (eval_split != "test" && eval_split != "valid" && eval_split != "train") {
      throw ConfigError("eval.split must be train, valid or test");
    }
    if (seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
    for (long s : seeds) {
      if (s < 0) throw ConfigError("seeds must be non-negative");
    }
    if (snapshot_interval < 1) throw ConfigError("train.snapshot_interval must be >= 1");
  }

  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;

  /// Canonical text form: every key, sorted.
  std::string snapshot() const {
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + "=" + v + "\n";
    return out;
  }

  static ExperimentConfig parse(const std::string& text) {
    ExperimentConfig c;
    std::istringstream is(text);
    std::string line;
    int number = 0;
    while (std::getline(is, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key=value");
      auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t");
        if (a == std::string::npos) return std::string();
        return s.substr(a, s.find_last_not_of(" \t") - a + 1);
      };
      try {
        c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError("line " + std::to_string(number) + ": " + e.what());
      }
    }
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse(ss.str());
  }
};

namespace config_detail {

template <typename N>
N parse_integer(const std::string& key, const std::string& v) {
  N out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::invalid_argument&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false");
}

/// Shortest text that reads back to the same double.
inline std::string real_text(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::vector<long> parse_list(const std::string& key, const std::string& v) {
  std::vector<long> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(parse_integer<long>(key, item));
  return out;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define STEPGAN_INT_FIELD(name, member, type)                                                                     \
  {name, {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = parse_integer<type>(k, v); }, \
          [](const ExperimentConfig& c) { return std::to_string(c.member); }}}
#define STEPGAN_REAL_FIELD(name, member)                                                                          \
  {name, {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.member = parse_real(k, v); },    \
          [](const ExperimentConfig& c) { return real_text(c.member); }}}
#define STEPGAN_TEXT_FIELD(name, member)                                                                          \
  {name, {[](ExperimentConfig& c, const std::string&, const std::string& v) { c.member = v; },                     \
          [](const ExperimentConfig& c) { return c.member; }}}

inline const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      STEPGAN_TEXT_FIELD("data.dir", data_dir),
      STEPGAN_INT_FIELD("data.seed", data_seed, std::uint64_t),
      STEPGAN_INT_FIELD("data.train_size", sizes.train, std::size_t),
      STEPGAN_INT_FIELD("data.valid_size", sizes.valid, std::size_t),
      STEPGAN_INT_FIELD("data.test_size", sizes.test, std::size_t),
      STEPGAN_INT_FIELD("data.nmax", nmax, int),
      STEPGAN_INT_FIELD("model.embed_dim", model.embed_dim, int),
      STEPGAN_INT_FIELD("model.hidden_dim", model.hidden_dim, int),
      STEPGAN_REAL_FIELD("model.init_scale", model.init_scale),
      STEPGAN_TEXT_FIELD("model.scalar", scalar),
      STEPGAN_TEXT_FIELD("strategy.kind", strategy_kind),
      STEPGAN_INT_FIELD("strategy.rollouts", rollouts, int),
      STEPGAN_TEXT_FIELD("strategy.alpha", alpha),
      STEPGAN_REAL_FIELD("strategy.alpha_offset", alpha_offset),
      STEPGAN_TEXT_FIELD("strategy.baseline", baseline),
      {"train.optimizer",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
          try {
            c.train.optimizer = parse_optimizer(v);
          } catch (const std::invalid_argument& e) {
            throw ConfigError(k + ": " + e.what());
          }
        },
        [](const ExperimentConfig& c) { return to_string(c.train.optimizer); }}},
      STEPGAN_REAL_FIELD("train.mle_learning_rate", train.mle_learning_rate),
      STEPGAN_REAL_FIELD("train.gan_learning_rate", train.gan_learning_rate),
      STEPGAN_INT_FIELD("train.d_iterations", train.d_iterations, int),
      STEPGAN_INT_FIELD("train.g_iterations", train.g_iterations, int),
      STEPGAN_INT_FIELD("train.batch_size", train.batch_size, int),
      STEPGAN_INT_FIELD("train.iterations", train.total_iterations, long),
      STEPGAN_REAL_FIELD("train.clip_norm", train.clip_norm),
      STEPGAN_INT_FIELD("train.max_len", train.max_len, int),
      STEPGAN_INT_FIELD("train.mle_max_iterations", train.mle_max_iterations, long),
      STEPGAN_INT_FIELD("train.mle_eval_interval", train.mle_eval_interval, long),
      STEPGAN_INT_FIELD("train.mle_patience", train.mle_patience, int),
      STEPGAN_INT_FIELD("train.mle_valid_examples", train.mle_valid_examples, std::size_t),
      STEPGAN_INT_FIELD("train.mle_seed", mle_seed, long),
      STEPGAN_INT_FIELD("train.d_pretrain_steps", train.d_pretrain_steps, long),
      STEPGAN_INT_FIELD("train.value_pretrain_steps", train.value_pretrain_steps, long),
      STEPGAN_INT_FIELD("train.snapshot_interval", snapshot_interval, long),
      STEPGAN_INT_FIELD("eval.samples", eval.samples, int),
      STEPGAN_REAL_FIELD("eval.epsilon", eval.epsilon),
      STEPGAN_INT_FIELD("eval.seed", eval.seed, std::uint64_t),
      STEPGAN_INT_FIELD("eval.examples", eval_examples, std::size_t),
      STEPGAN_INT_FIELD("eval.snapshot_examples", snapshot_examples, std::size_t),
      STEPGAN_TEXT_FIELD("eval.split", eval_split),
      STEPGAN_TEXT_FIELD("run.output", output),
      {"run.seeds",
       {[](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seeds = parse_list(k, v); },
        [](const ExperimentConfig& c) {
          std::string s;
          for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
          return s;
        }}},
      STEPGAN_TEXT_FIELD("run.pretrained", pretrained),
  };
  return table;
}

#undef STEPGAN_INT_FIELD
#undef STEPGAN_REAL_FIELD
#undef STEPGAN_TEXT_FIELD

}  // namespace config_detail

inline void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto& table = config_detail::fields();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(*this, key, value);
}

inline std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : config_detail::fields()) out[k] = f.get(*this);
  return out;
}

}  // namespace stepgan
