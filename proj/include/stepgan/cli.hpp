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

// Command-line front end. Exit codes: 0 success, 1 configuration or input
// error, 2 training divergence.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stepgan/experiment.hpp"

namespace stepgan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitDivergence = 2;
inline constexpr const char* kOutputRootEnv = "STEPGAN_OUTPUT_ROOT";

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Config file, then the output-root environment variable, then flags.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : ExperimentConfig::load(path);
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) cfg.output = root;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

inline bool is_double(const ExperimentConfig& cfg) { return cfg.scalar == "float64"; }

}  // namespace detail

inline int cmd_gen_data(std::uint64_t seed, const std::string& sizes_text, int nmax, const std::string& out,
                        std::ostream& log) {
  const auto parts = detail::split(sizes_text, ',');
  if (parts.size() != 3) throw ConfigError("--sizes expects train,valid,test");
  DatasetSizes sizes{config_detail::parse_integer<std::size_t>("sizes", parts[0]),
                     config_detail::parse_integer<std::size_t>("sizes", parts[1]),
                     config_detail::parse_integer<std::size_t>("sizes", parts[2])};
  CountingDataset ds;
  try {
    ds = generate_dataset(seed, sizes, nmax);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  write_dataset(out, ds);
  log << "wrote " << ds.train.size() << "/" << ds.valid.size() << "/" << ds.test.size() << " examples to " << out
      << " (mean answers per input " << mean_answer_count(ds.train) << ")\n";
  return kExitOk;
}

inline int cmd_train(const ExperimentConfig& cfg, bool resume, std::ostream& log) {
  cfg.validate();
  for (long seed : cfg.seeds) {
    const auto outcome = detail::is_double(cfg) ? run_experiment<double>(cfg, seed, resume, log)
                                                : run_experiment<float>(cfg, seed, resume, log);
    log << "run directory: " << outcome.directory.string() << "\n";
  }
  log << "box-plot data: " << write_prec_boxplot(cfg).string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string table;
  std::string general_from;
  std::optional<std::string> strategy;
  std::optional<long> seed;
  std::optional<long> iteration;
};

template <typename T>
EvalReport evaluate_checkpoint(const ExperimentConfig& cfg, const EvalArgs& a, const std::vector<CountingExample>& examples,
                               const std::set<TokenSequence>* general) {
  EvalOptions opt = cfg.eval;
  opt.max_len = cfg.train.max_len;
  if (a.checkpoint == "oracle") return evaluate(CountingOracle{}, examples, opt, general);
  const auto sections = read_checkpoint(a.checkpoint);
  return evaluate(generator_from<T>(find_section(sections, "model", "generator")), examples, opt, general);
}

inline int cmd_eval(const ExperimentConfig& cfg, EvalArgs a, std::ostream& log) {
  namespace fs = std::filesystem;
  cfg.validate();
  std::string strategy = "oracle", scalar = cfg.scalar;
  long seed = 0, iteration = 0;
  fs::path table = a.table;
  if (a.checkpoint != "oracle") {
    if (!fs::exists(a.checkpoint)) throw ConfigError("checkpoint not found: " + a.checkpoint);
    const auto sections = read_checkpoint(a.checkpoint);
    scalar = checkpoint_scalar(sections);
    if (has_section(sections, "info", "run")) {
      const auto& info = find_section(sections, "info", "run");
      strategy = info.attr("strategy");
      seed = std::stol(info.attr("seed"));
      iteration = std::stol(info.attr("iteration"));
    } else {
      strategy = "unknown";
    }
    const fs::path parent = fs::path(a.checkpoint).parent_path();
    if (table.empty() && parent.filename() == "checkpoints") table = parent.parent_path() / "eval.csv";
  }
  if (table.empty()) table = fs::path(cfg.output) / "eval.csv";
  strategy = a.strategy.value_or(strategy);
  seed = a.seed.value_or(seed);
  iteration = a.iteration.value_or(iteration);

  const CountingDataset ds = load_dataset(cfg);
  const auto examples = head_of(eval_split(cfg, ds), cfg.eval_examples);
  std::optional<std::set<TokenSequence>> general;
  if (!a.general_from.empty()) {
    if (!fs::exists(a.general_from)) throw ConfigError("checkpoint not found: " + a.general_from);
    const auto sections = read_checkpoint(a.general_from);
    const auto& gs = find_section(sections, "model", "generator");
    const auto responses = gs.attr("scalar") == "float64"
                               ? argmax_responses(generator_from<double>(gs), examples, cfg.train.max_len)
                               : argmax_responses(generator_from<float>(gs), examples, cfg.train.max_len);
    general = build_general_set(responses);
  }
  EvalReport r = scalar == "float64" ? evaluate_checkpoint<double>(cfg, a, examples, general ? &*general : nullptr)
                                     : evaluate_checkpoint<float>(cfg, a, examples, general ? &*general : nullptr);
  r.strategy = strategy;
  r.seed = seed;
  r.iteration = iteration;
  r.model_id = a.checkpoint;
  upsert_csv(table, r);
  log << csv_header() << "\n" << csv_row(r) << "\n" << "table: " << table.string() << "\n";
  return kExitOk;
}

inline int cmd_probe_variance(const std::string& run_dir, const std::string& probe_file, const std::string& scalar,
                              int max_len, std::ostream& log) {
  namespace fs = std::filesystem;
  std::ifstream is(probe_file);
  if (!is) throw ConfigError("cannot read probe file " + probe_file);
  std::string line;
  int index = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError("probe lines are '<x digits>\\t<y digits>'");
    const TokenSequence x = parse_tokens(line.substr(0, tab));
    const TokenSequence y = parse_tokens(line.substr(tab + 1));
    const auto profile = scalar == "float64" ? probe_run<double>(run_dir, x, y, max_len)
                                             : probe_run<float>(run_dir, x, y, max_len);
    std::vector<std::pair<double, double>> rows;
    for (std::size_t t = 0; t < profile.variance.size(); ++t) rows.emplace_back(static_cast<double>(t + 1), profile.variance[t]);
    const fs::path out = fs::path(run_dir) / "plots" / ("q_variance_" + std::to_string(index++) + ".dat");
    write_plot_data(out, rows, "step\tvariance  x=" + to_string(x) + " y=" + to_string(y));
    log << out.string() << "\n";
  }
  if (index == 0) throw ConfigError("probe file has no probes");
  return kExitOk;
}

template <typename T>
std::vector<TimingResult> bench(const ExperimentConfig& cfg, const std::vector<std::pair<std::string, StrategyConfig>>& s,
                                int warmup, int iters) {
  const CountingDataset ds = load_dataset(cfg);
  const long seed = cfg.seeds.front();
  std::optional<Generator<T>> g;
  const std::string pretrained = cfg.pretrained_path(seed);
  if (!pretrained.empty() && std::filesystem::exists(pretrained)) {
    g.emplace(generator_from<T>(find_section(read_checkpoint(pretrained), "model", "generator")));
  } else {
    g.emplace(cfg.model, mix_seed(static_cast<std::uint64_t>(seed), stream::kGeneratorInit));
  }
  return timing_benchmark(s, *g, cfg.training(seed), ds.train, warmup, iters);
}

inline int cmd_bench_time(const ExperimentConfig& cfg, const std::string& strategies, int warmup, int iters,
                          const std::string& out, std::ostream& log) {
  cfg.validate();
  std::vector<std::pair<std::string, StrategyConfig>> specs;
  for (const auto& s : detail::split(strategies, ',')) {
    try {
      specs.push_back(parse_strategy_spec(s));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (specs.empty()) throw ConfigError("--strategies is empty");
  if (iters < 10) throw ConfigError("--iters must be >= 10");
  const auto results = detail::is_double(cfg) ? bench<double>(cfg, specs, warmup, iters) : bench<float>(cfg, specs, warmup, iters);
  std::ostringstream csv;
  csv << "strategy,rollouts,hidden_dim,batch_size,iterations,seconds_per_iteration\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    csv << results[i].label << ',' << specs[i].second.rollouts << ',' << cfg.model.hidden_dim << ','
        << cfg.train.batch_size << ',' << results[i].iterations << ',' << format_number(results[i].seconds_per_iteration)
        << '\n';
  }
  const std::filesystem::path path = out.empty() ? std::filesystem::path(cfg.output) / "timing.csv" : std::filesystem::path(out);
  write_text(path, csv.str());
  log << csv.str() << "table: " << path.string() << "\n";
  return kExitOk;
}

/// Parses `argv` and dispatches to a subcommand.
inline int run(int argc, char** argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Credit-assignment workbench for sequence GANs on the counting task"};
  app.require_subcommand(1);

  std::uint64_t gen_seed = 0;
  std::string gen_sizes = "100000,10000,10000", gen_out = "data";
  int gen_nmax = kDefaultMaxInputLength;
  auto* gen = app.add_subcommand("gen-data", "Generate the counting dataset");
  gen->add_option("--seed", gen_seed, "Dataset seed")->capture_default_str();
  gen->add_option("--sizes", gen_sizes, "train,valid,test sizes")->capture_default_str();
  gen->add_option("--nmax", gen_nmax, "Maximum input length")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

  std::string config_path;
  std::vector<std::string> overrides;
  std::string strategy, seeds, out_root;
  std::optional<long> iterations;
  bool resume = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value configuration file");
    sub->add_option("--set", overrides, "Override one key (key=value); repeatable");
    sub->add_option("--out", out_root, "Output root (overrides run.output and " + std::string(kOutputRootEnv) + ")");
  };
  auto* train = app.add_subcommand("train", "Pretrain with MLE and, unless --strategy mle, train adversarially");
  add_common(train);
  train->add_option("--strategy", strategy, "mle, seqgan, regs, mcts, maskgan, stepgan or stepgan_w");
  train->add_option("--seed", seeds, "Comma-separated run seeds");
  train->add_option("--iterations", iterations, "Adversarial iterations");
  train->add_flag("--resume", resume, "Continue from checkpoints/state.ckpt when present");

  EvalArgs eval_args;
  std::string dataset;
  std::optional<int> samples;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint (or 'oracle') and update an EvalReport table");
  add_common(eval);
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file or 'oracle'")->required();
  eval->add_option("--dataset", dataset, "Dataset directory (overrides data.dir)");
  eval->add_option("--samples", samples, "Samples per input for SampP/SampR");
  eval->add_option("--table", eval_args.table, "CSV table to update");
  eval->add_option("--general-from", eval_args.general_from, "MLE checkpoint defining general responses");
  eval->add_option("--strategy", eval_args.strategy, "Row key override");
  eval->add_option("--seed", eval_args.seed, "Row key override");
  eval->add_option("--iteration", eval_args.iteration, "Row key override");

  std::string run_dir, probe_file, probe_scalar = "float32";
  int probe_max_len = vocab::kDefaultMaxLen;
  auto* probe = app.add_subcommand("probe-variance", "Per-step variance of discriminator scores across checkpoints");
  probe->add_option("--run-dir", run_dir, "Run directory")->required();
  probe->add_option("--probe-file", probe_file, "Lines of '<x digits>\\t<y digits>'")->required();
  probe->add_option("--scalar", probe_scalar, "Checkpoint scalar type")->capture_default_str();
  probe->add_option("--max-len", probe_max_len, "Maximum output length")->capture_default_str();

  std::string bench_strategies, bench_out;
  int warmup = 3, bench_iters = 20;
  auto* bench_cmd = app.add_subcommand("bench-time", "Mean seconds per adversarial iteration per strategy");
  add_common(bench_cmd);
  bench_cmd->add_option("--strategies", bench_strategies, "e.g. stepgan,mcts,mcts:10,seqgan")->required();
  bench_cmd->add_option("--warmup", warmup, "Unmeasured iterations per strategy")->capture_default_str();
  bench_cmd->add_option("--iters", bench_iters, "Measured iterations per strategy (>= 10)")->capture_default_str();
  bench_cmd->add_option("--table", bench_out, "Timing CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_seed, gen_sizes, gen_nmax, gen_out, log);
    if (probe->parsed()) return cmd_probe_variance(run_dir, probe_file, probe_scalar, probe_max_len, log);

    ExperimentConfig cfg = detail::load_config(config_path, overrides);
    if (!out_root.empty()) cfg.output = out_root;
    if (train->parsed()) {
      if (!strategy.empty()) cfg.set("strategy.kind", strategy);
      if (!seeds.empty()) cfg.set("run.seeds", seeds);
      if (iterations) cfg.train.total_iterations = *iterations;
      return cmd_train(cfg, resume, log);
    }
    if (eval->parsed()) {
      if (!dataset.empty()) cfg.data_dir = dataset;
      if (samples) cfg.eval.samples = *samples;
      return cmd_eval(cfg, eval_args, log);
    }
    if (bench_cmd->parsed()) return cmd_bench_time(cfg, bench_strategies, warmup, bench_iters, bench_out, log);
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace stepgan::cli
