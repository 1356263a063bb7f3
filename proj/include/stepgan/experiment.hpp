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

// Run orchestration on top of the training and evaluation modules.
//
// Run directory, one per (strategy, seed):
//
//   <output>/<strategy>/seed_<k>/
//     config.snapshot         effective configuration, every key
//     history.log             one JSON record per line, no timings
//     timing.log              wall-clock seconds per record
//     eval.csv                EvalReport rows keyed by (strategy, seed, iteration)
//     checkpoints/iter_NNNNNN.ckpt   generator, discriminator, value
//     checkpoints/state.ckpt  latest resumable trainer state
//     plots/                  plot-data files
//
// A shared MLE checkpoint (run.pretrained) is a pure function of the
// configuration: it is trained with train.mle_seed and its own history sits
// next to it, so runs that load it log the same records whether or not
// they happened to create it.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stepgan/config.hpp"

namespace stepgan {

namespace fs = std::filesystem;

inline CountingDataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.data_dir.empty()) return generate_dataset(cfg.data_seed, cfg.sizes, cfg.nmax);
  const fs::path dir(cfg.data_dir);
  CountingDataset ds;
  try {
    ds.train = read_examples(dir / "train.txt", cfg.nmax);
    ds.valid = read_examples(dir / "valid.txt", cfg.nmax);
    ds.test = read_examples(dir / "test.txt", cfg.nmax);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  ds.max_input_length = cfg.nmax;
  return ds;
}

inline const std::vector<CountingExample>& eval_split(const ExperimentConfig& cfg, const CountingDataset& ds) {
  if (cfg.eval_split == "train") return ds.train;
  if (cfg.eval_split == "valid") return ds.valid;
  return ds.test;
}

inline std::vector<CountingExample> head_of(const std::vector<CountingExample>& v, std::size_t n) {
  if (n == 0 || n >= v.size()) return v;
  return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)};
}

inline fs::path run_directory(const ExperimentConfig& cfg, long seed) {
  return fs::path(cfg.output) / cfg.strategy_kind / ("seed_" + std::to_string(seed));
}

inline std::string iteration_name(long it) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "iter_%06ld.ckpt", it);
  return buf;
}

inline CheckpointSection info_section(const std::string& strategy, long seed, long iteration) {
  CheckpointSection s;
  s.kind = "info";
  s.attrs["name"] = "run";
  s.attrs["strategy"] = strategy;
  s.attrs["seed"] = std::to_string(seed);
  s.attrs["iteration"] = std::to_string(iteration);
  return s;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

/// MLE-pretrained generator for a run: loaded from run.pretrained when that
/// file exists, otherwise trained (and saved there when the key is set).
template <typename T>
Generator<T> pretrained_generator(const ExperimentConfig& cfg, const CountingDataset& ds, long seed,
                                  TrainingHistory& history, std::ostream& log) {
  const long mle_seed = cfg.mle_seed_for(seed);
  const std::string path = cfg.pretrained_path(seed);
  if (!path.empty() && fs::exists(path)) {
    const auto sections = read_checkpoint(path);
    const auto& gs = find_section(sections, "model", "generator");
    if (gs.attr("scalar") != ScalarName<T>::value || !(get_config(gs) == cfg.model)) {
      throw ConfigError("pretrained checkpoint " + path + " does not match model.* settings");
    }
    history.add(HistoryRecord{{"phase", "mle_pretrained"}, {"iteration", 0}, {"source", path}});
    return generator_from<T>(gs);
  }
  Generator<T> g(cfg.model, mix_seed(static_cast<std::uint64_t>(mle_seed), stream::kGeneratorInit));
  TrainingConfig tc = cfg.training(mle_seed);
  log << "MLE pretraining (seed " << mle_seed << ", up to " << tc.mle_max_iterations << " iterations)\n";
  MleResult r;
  if (path.empty()) {
    r = pretrain_mle(g, ds.train, ds.valid, tc, &history);
  } else {
    TrainingHistory own;
    own.attach(path + ".history.log", path + ".timing.log", false);
    r = pretrain_mle(g, ds.train, ds.valid, tc, &own);
    CheckpointSection meta = info_section("mle", mle_seed, r.best_iteration);
    meta.attrs["valid_loss"] = hex_double(r.best_valid_loss);
    write_checkpoint(path, {model_section("generator", g), meta});
    history.add(HistoryRecord{{"phase", "mle_pretrained"}, {"iteration", 0}, {"source", path}});
  }
  log << "  stopped after " << r.iterations << " iterations; best validation NLL " << r.best_valid_loss << " at "
      << r.best_iteration << "\n";
  return g;
}

/// Evaluation-record view of a report, for history.log.
inline HistoryRecord eval_record(const EvalReport& r) {
  HistoryRecord h;
  h["phase"] = "eval";
  h["iteration"] = r.iteration;
  h["inputs"] = r.inputs;
  h["prec"] = r.prec;
  h["samp_p"] = r.samp_p;
  h["samp_r"] = r.samp_r;
  h["fkld"] = r.fkld;
  h["ikld"] = r.ikld;
  h["fkld_plus_ikld"] = r.fkld_plus_ikld;
  return h;
}

/// Drops records past `iteration` from a history file (for resumption).
inline void truncate_history(const fs::path& path, long iteration) {
  if (!fs::exists(path)) return;
  std::ifstream is(path);
  std::string line, kept;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto r = nlohmann::ordered_json::parse(line);
    const std::string phase = r.value("phase", "");
    const bool adversarial = phase == "gan" || phase == "eval" || phase == "checkpoint";
    if (adversarial && r.value("iteration", 0L) > iteration) continue;
    kept += line + "\n";
  }
  is.close();
  write_text(path, kept);
}

struct RunOutcome {
  fs::path directory;
  long iterations = 0;
  std::optional<EvalReport> final_report;
};

/// Trains and evaluates one (strategy, seed) run. Throws DivergenceError if
/// training blows up; checkpoints written before that point remain.
template <typename T>
RunOutcome run_experiment(const ExperimentConfig& cfg, long seed, bool resume, std::ostream& log) {
  cfg.validate();
  const StrategyConfig strategy = cfg.strategy();
  const fs::path dir = run_directory(cfg, seed);
  const fs::path ckpt_dir = dir / "checkpoints";
  fs::create_directories(ckpt_dir);
  fs::create_directories(dir / "plots");
  ExperimentConfig effective = cfg;
  effective.seeds = {seed};
  write_text(dir / "config.snapshot", effective.snapshot());

  const fs::path state_path = ckpt_dir / "state.ckpt";
  const bool resuming = resume && strategy.adversarial() && fs::exists(state_path);
  std::optional<std::vector<CheckpointSection>> state;
  long resume_at = 0;
  if (resuming) {
    state = read_checkpoint(state_path);
    resume_at = std::stol(find_section(*state, "trainer", "trainer").attr("iteration"));
    truncate_history(dir / "history.log", resume_at);
    log << "resuming " << dir.string() << " at iteration " << resume_at << "\n";
  } else {
    fs::remove(dir / "eval.csv");
  }
  TrainingHistory history;
  history.attach(dir / "history.log", dir / "timing.log", resuming);

  const CountingDataset ds = load_dataset(cfg);
  const auto& split = eval_split(cfg, ds);
  const auto final_examples = head_of(split, cfg.eval_examples);
  const auto snapshot_examples = head_of(split, cfg.snapshot_examples);

  Generator<T> g = resuming ? generator_from<T>(find_section(*state, "model", "generator"))
                            : pretrained_generator<T>(cfg, ds, seed, history, log);

  // The general-response set comes from the MLE model's argmax outputs.
  std::optional<Generator<T>> mle_model;
  const std::string pretrained = cfg.pretrained_path(seed);
  if (resuming && !pretrained.empty() && fs::exists(pretrained)) {
    mle_model.emplace(generator_from<T>(find_section(read_checkpoint(pretrained), "model", "generator")));
  } else if (!resuming) {
    mle_model.emplace(g);
  }

  RunOutcome outcome{dir, 0, std::nullopt};
  auto evaluate_at = [&](const auto& policy, long it, bool final) {
    const auto& examples = final ? final_examples : snapshot_examples;
    std::optional<std::set<TokenSequence>> general;
    if (mle_model) general = build_general_set(argmax_responses(*mle_model, examples, cfg.train.max_len));
    EvalOptions opt = cfg.eval;
    opt.max_len = cfg.train.max_len;
    EvalReport r = evaluate(policy, examples, opt, general ? &*general : nullptr);
    r.strategy = cfg.strategy_kind;
    r.seed = seed;
    r.iteration = it;
    r.model_id = cfg.strategy_kind + "/seed_" + std::to_string(seed) + "/" + iteration_name(it);
    upsert_csv(dir / "eval.csv", r);
    history.add(eval_record(r));
    log << "  iter " << it << ": Prec " << r.prec << "  SampP " << r.samp_p << "  SampR " << r.samp_r << "  FKLD "
        << r.fkld << "  IKLD " << r.ikld << "\n";
    if (final) outcome.final_report = r;
  };

  if (!strategy.adversarial()) {
    write_checkpoint(ckpt_dir / iteration_name(0), {model_section("generator", g), info_section("mle", seed, 0)});
    history.add(HistoryRecord{{"phase", "checkpoint"}, {"iteration", 0}, {"file", "checkpoints/" + iteration_name(0)}});
    evaluate_at(g, 0, true);
    return outcome;
  }

  auto trainer = GanTrainer<T>::fresh(std::move(g), strategy, cfg.training(seed), ds.train);
  const long total = cfg.train.total_iterations;
  auto snapshot = [&](long it) {
    auto sections = std::vector<CheckpointSection>{
        model_section("generator", trainer.generator()), model_section("discriminator", trainer.discriminator()),
        model_section("value", trainer.value()), info_section(cfg.strategy_kind, seed, it)};
    write_checkpoint(ckpt_dir / iteration_name(it), sections);
    history.add(HistoryRecord{{"phase", "checkpoint"}, {"iteration", it}, {"file", "checkpoints/" + iteration_name(it)}});
    evaluate_at(trainer.generator(), it, it == total);
    write_checkpoint(state_path, trainer.state());
  };

  if (resuming) {
    trainer.restore(*state);
  } else {
    log << "discriminator pretraining (" << cfg.train.d_pretrain_steps << " steps)\n";
    trainer.pretrain(&history);
    snapshot(0);
  }
  log << "adversarial training: " << cfg.strategy_kind << ", seed " << seed << ", " << total << " iterations\n";
  train_gan(trainer, history, cfg.snapshot_interval, snapshot);
  outcome.iterations = trainer.iteration();
  return outcome;
}

/// Final Prec of every seed directory under <output>/<strategy>, written as
/// two-column plot data (seed, Prec).
inline fs::path write_prec_boxplot(const ExperimentConfig& cfg) {
  const fs::path root = fs::path(cfg.output) / cfg.strategy_kind;
  std::vector<std::pair<double, double>> rows;
  if (fs::exists(root)) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      std::ifstream is(d / "eval.csv");
      std::string line;
      if (!std::getline(is, line)) continue;
      long best_it = -1;
      double prec = 0.0;
      while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::vector<std::string> cols;
        std::string c;
        while (std::getline(ls, c, ',')) cols.push_back(c);
        if (cols.size() < 7) continue;
        const long it = std::stol(cols[2]);
        if (it > best_it) {
          best_it = it;
          prec = std::stod(cols[6]);
        }
      }
      if (best_it >= 0) rows.emplace_back(std::stod(d.filename().string().substr(5)), prec);
    }
  }
  const fs::path out = root / "prec_boxplot.dat";
  write_plot_data(out, rows, "seed\tprec");
  return out;
}

/// Per-step variance of the discriminator's scores on one probe pair across
/// all iteration checkpoints of a run, in checkpoint order.
template <typename T>
VarianceProfile probe_run(const fs::path& run_dir, const TokenSequence& x, const TokenSequence& y, int max_len) {
  std::vector<fs::path> files;
  const fs::path ckpt_dir = run_dir / "checkpoints";
  if (fs::exists(ckpt_dir)) {
    for (const auto& e : fs::directory_iterator(ckpt_dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("iter_", 0) == 0 && e.path().extension() == ".ckpt") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<StepScorer<T>> ds;
  for (const auto& f : files) {
    const auto sections = read_checkpoint(f);
    if (has_section(sections, "model", "discriminator")) {
      ds.push_back(scorer_from<T>(find_section(sections, "model", "discriminator"), ScorerRole::kDiscriminator));
    }
  }
  std::vector<const StepScorer<T>*> ptrs;
  for (const auto& d : ds) ptrs.push_back(&d);
  return q_variance_probe(ptrs, x, to_actions(y, max_len, vocab::kEos));
}

struct TimingResult {
  std::string label;
  double seconds_per_iteration = 0.0;
  int iterations = 0;
};

/// Mean wall-clock seconds per adversarial iteration for each strategy on
/// the same generator, data and configuration, after `warmup` unmeasured
/// iterations. Strategies are stepped round-robin so that drifting machine
/// load is shared evenly instead of landing on whichever ran last.
template <typename T>
std::vector<TimingResult> timing_benchmark(const std::vector<std::pair<std::string, StrategyConfig>>& strategies,
                                           const Generator<T>& g, const TrainingConfig& cfg,
                                           const std::vector<CountingExample>& train, int warmup, int measured) {
  if (strategies.empty()) throw std::invalid_argument("timing_benchmark: no strategies");
  if (measured < 10) throw std::invalid_argument("timing_benchmark: at least 10 measured iterations");
  if (warmup < 0) throw std::invalid_argument("timing_benchmark: negative warmup");
  std::vector<GanTrainer<T>> trainers;
  trainers.reserve(strategies.size());
  for (const auto& [label, s] : strategies) trainers.push_back(GanTrainer<T>::fresh(g, s, cfg, train));
  for (int i = 0; i < warmup; ++i) {
    for (auto& t : trainers) t.step();
  }
  std::vector<double> seconds(trainers.size(), 0.0);
  for (int i = 0; i < measured; ++i) {
    for (std::size_t k = 0; k < trainers.size(); ++k) {
      Stopwatch clock;
      trainers[k].step();
      seconds[k] += clock.seconds();
    }
  }
  std::vector<TimingResult> out;
  for (std::size_t k = 0; k < trainers.size(); ++k) out.push_back({strategies[k].first, seconds[k] / measured, measured});
  return out;
}

/// "mcts:10" -> MCTS with 10 rollouts; plain names use the defaults.
inline std::pair<std::string, StrategyConfig> parse_strategy_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  StrategyConfig s = StrategyConfig::defaults(parse_strategy(name));
  if (colon != std::string::npos) {
    const std::string n = spec.substr(colon + 1);
    s.rollouts = config_detail::parse_integer<int>("rollouts", n);
  }
  s.validate();
  if (!s.adversarial()) throw std::invalid_argument("mle has no adversarial iteration to time");
  return {spec, s};
}

}  // namespace stepgan
