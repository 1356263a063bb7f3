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

// Training procedures: teacher-forced MLE pretraining, discriminator
// pretraining, and the adversarial loop (discriminator updates, value
// regression, generator policy-gradient updates).
//
// Every random draw comes from an Rng owned by the procedure and derived
// from TrainingConfig::seed, so a run is a pure function of its inputs.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stepgan/checkpoint.hpp"
#include "stepgan/counting_task.hpp"
#include "stepgan/credit_assignment.hpp"
#include "stepgan/optimizer.hpp"

namespace stepgan {

struct TrainingConfig {
  OptimizerKind optimizer = OptimizerKind::kRmsProp;
  double mle_learning_rate = 1e-3;
  double gan_learning_rate = 1e-4;
  int d_iterations = 5;
  int g_iterations = 1;
  int batch_size = 64;
  long total_iterations = 5000;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  int max_len = vocab::kDefaultMaxLen;

  long mle_max_iterations = 30000;
  long mle_eval_interval = 500;
  int mle_patience = 3;
  std::size_t mle_valid_examples = 2000;  // 0: the whole split

  long d_pretrain_steps = 1000;
  long value_pretrain_steps = 0;

  void validate() const {
    if (!(mle_learning_rate > 0.0) || !(gan_learning_rate > 0.0)) throw std::invalid_argument("learning rates must be positive");
    if (d_iterations < 1 || g_iterations < 1) throw std::invalid_argument("d_iterations and g_iterations must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (total_iterations < 0) throw std::invalid_argument("total_iterations must be >= 0");
    if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
    if (mle_max_iterations < 0 || mle_eval_interval < 1 || mle_patience < 1) {
      throw std::invalid_argument("invalid MLE schedule");
    }
    if (d_pretrain_steps < 0 || value_pretrain_steps < 0) throw std::invalid_argument("pretraining steps must be >= 0");
  }

  OptimizerConfig mle_optimizer() const { return {optimizer, mle_learning_rate, clip_norm}; }
  OptimizerConfig gan_optimizer() const { return {optimizer, gan_learning_rate, clip_norm}; }
};

/// Raised when a loss or gradient stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

// Independent random streams carved out of one seed.
namespace stream {
inline constexpr std::uint64_t kGeneratorInit = 1;
inline constexpr std::uint64_t kDiscriminatorInit = 2;
inline constexpr std::uint64_t kValueInit = 3;
inline constexpr std::uint64_t kMle = 10;
inline constexpr std::uint64_t kAdversarial = 20;
}  // namespace stream

using HistoryRecord = nlohmann::ordered_json;

/// Append-only log of training records. Records hold only deterministic
/// values; wall-clock time is kept in a parallel list (and a separate file)
/// so logs of identical runs compare byte for byte.
class TrainingHistory {
 public:
  void add(HistoryRecord record, double seconds = 0.0) {
    if (log_) *log_ << record.dump() << '\n' << std::flush;
    if (timing_) {
      HistoryRecord t;
      t["phase"] = record.value("phase", "");
      t["iteration"] = record.value("iteration", 0L);
      t["seconds"] = seconds;
      *timing_ << t.dump() << '\n' << std::flush;
    }
    records_.push_back(std::move(record));
    seconds_.push_back(seconds);
  }

  /// Mirrors subsequent records into line-delimited files.
  void attach(const std::filesystem::path& log, const std::filesystem::path& timing, bool append) {
    const auto mode = append ? std::ios::app : std::ios::trunc;
    log_.emplace(log, std::ios::out | mode);
    timing_.emplace(timing, std::ios::out | mode);
    if (!*log_ || !*timing_) throw std::runtime_error("cannot open history files in " + log.parent_path().string());
  }

  const std::vector<HistoryRecord>& records() const { return records_; }
  const std::vector<double>& seconds() const { return seconds_; }

  std::string dump() const {
    std::string out;
    for (const auto& r : records_) out += r.dump() + "\n";
    return out;
  }

 private:
  std::vector<HistoryRecord> records_;
  std::vector<double> seconds_;
  std::optional<std::ofstream> log_;
  std::optional<std::ofstream> timing_;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

namespace detail {

inline void require_finite(double v, const char* what, long iteration) {
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + what, iteration);
}

struct Batch {
  std::vector<TokenSequence> xs;
  std::vector<TokenSequence> answers;  // action form, EOS appended
};

inline Batch batch_from(const std::vector<CountingExample>& data, const std::vector<std::size_t>& idx, int max_len) {
  Batch b;
  b.xs.reserve(idx.size());
  b.answers.reserve(idx.size());
  for (std::size_t i : idx) {
    b.xs.push_back(data[i].input.tokens());
    b.answers.push_back(to_actions(data[i].answer.tokens(), max_len, vocab::kEos));
  }
  return b;
}

inline Batch sample_batch(const std::vector<CountingExample>& data, int size, Rng& rng, int max_len) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(size));
  for (auto& i : idx) i = uniform_index(rng, data.size());
  return batch_from(data, idx, max_len);
}

template <typename T>
void negate(Seq2SeqParams<T>& p) {
  for (auto& t : p.tensors()) *t.value = -*t.value;
}

}  // namespace detail

/// Mean per-sequence negative log-likelihood of the answers under `g`.
template <typename T>
double mean_nll(const Generator<T>& g, const std::vector<CountingExample>& data, int max_len,
                std::size_t limit = 0, std::size_t chunk = 512) {
  const std::size_t n = limit == 0 ? data.size() : std::min(limit, data.size());
  if (n == 0) throw std::invalid_argument("mean_nll: no examples");
  double total = 0.0;
  for (std::size_t b = 0; b < n; b += chunk) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b; i < std::min(n, b + chunk); ++i) idx.push_back(i);
    const auto batch = detail::batch_from(data, idx, max_len);
    for (double lp : g.log_probs(g.forced(batch.xs, batch.answers))) total -= lp;
  }
  return total / static_cast<double>(n);
}

struct MleResult {
  long iterations = 0;
  long best_iteration = 0;
  double best_valid_loss = 0.0;
  bool early_stopped = false;
};

/// Teacher-forced cross-entropy training with early stopping on validation
/// loss. On return `g` holds the best-validation parameters.
template <typename T>
MleResult pretrain_mle(Generator<T>& g, const std::vector<CountingExample>& train,
                       const std::vector<CountingExample>& valid, const TrainingConfig& cfg,
                       TrainingHistory* history = nullptr) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("pretrain_mle: empty training set");
  const auto& held_out = valid.empty() ? train : valid;
  Optimizer<T> opt(cfg.mle_optimizer());
  Rng rng(mix_seed(cfg.seed, stream::kMle));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  MleResult result;
  result.best_valid_loss = mean_nll(g, held_out, cfg.max_len, cfg.mle_valid_examples);
  Seq2SeqParams<T> best = g.params();
  int stale = 0;
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  const double inv_b = 1.0 / static_cast<double>(B);

  for (long it = 1; it <= cfg.mle_max_iterations; ++it) {
    Stopwatch clock;
    std::vector<std::size_t> idx;
    while (idx.size() < B) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    const auto batch = detail::batch_from(train, idx, cfg.max_len);
    const auto pass = g.forced(batch.xs, batch.answers);
    double loss = 0.0;
    for (double lp : g.log_probs(pass)) loss -= lp * inv_b;
    detail::require_finite(loss, "MLE loss", it);
    std::vector<std::vector<double>> coef(B);
    for (std::size_t b = 0; b < B; ++b) coef[b].assign(batch.answers[b].size(), -inv_b);
    auto grads = g.zero_grads();
    g.accumulate_log_prob_gradient(pass, coef, grads);
    const double norm = opt.step(g.params(), grads);
    detail::require_finite(norm, "MLE gradient", it);
    result.iterations = it;
    if (history) {
      HistoryRecord r;
      r["phase"] = "mle";
      r["iteration"] = it;
      r["loss"] = loss;
      r["grad_norm"] = norm;
      history->add(std::move(r), clock.seconds());
    }
    if (it % cfg.mle_eval_interval == 0) {
      const double vl = mean_nll(g, held_out, cfg.max_len, cfg.mle_valid_examples);
      detail::require_finite(vl, "validation loss", it);
      const bool improved = vl < result.best_valid_loss;
      if (improved) {
        result.best_valid_loss = vl;
        result.best_iteration = it;
        best = g.params();
        stale = 0;
      } else {
        ++stale;
      }
      if (history) {
        HistoryRecord r;
        r["phase"] = "mle_valid";
        r["iteration"] = it;
        r["valid_loss"] = vl;
        r["improved"] = improved;
        history->add(std::move(r));
      }
      if (stale >= cfg.mle_patience) {
        result.early_stopped = true;
        break;
      }
    }
  }
  g.params() = best;
  return result;
}

/// One gradient step of V towards detached per-step targets. Returns the
/// mean squared error before the step.
template <typename T>
double update_value_network(StepScorer<T>& v, Optimizer<T>& opt, const std::vector<TokenSequence>& xs,
                            const std::vector<TokenSequence>& ys, const std::vector<StepScores>& targets) {
  if (xs.size() != ys.size() || xs.size() != targets.size() || xs.empty()) {
    throw std::invalid_argument("update_value_network: batch size mismatch");
  }
  const auto pass = v.forward_pass(xs, ys);
  std::size_t count = 0;
  for (std::size_t b = 0; b < ys.size(); ++b) {
    if (targets[b].size() != ys[b].size()) throw std::invalid_argument("update_value_network: target length mismatch");
    count += ys[b].size();
  }
  Matrix<double> d_logits = Matrix<double>::Zero(pass.logits.rows(), pass.logits.cols());
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t b = 0; b < ys.size(); ++b) {
    for (std::size_t t = 0; t < ys[b].size(); ++t) {
      const double a = pass.logits(static_cast<Index>(b), static_cast<Index>(t));
      const double s = sigmoid(a);
      const double diff = s - targets[b][t];
      loss += inv * diff * diff;
      d_logits(static_cast<Index>(b), static_cast<Index>(t)) = inv * 2.0 * diff * s * (1.0 - s);
    }
  }
  auto grads = v.zero_grads();
  v.backward_logits(pass, d_logits, grads);
  opt.step(v.params(), grads);
  return loss;
}

/// Trains D against samples from a fixed G for `steps` updates and returns
/// the last batch's statistics.
template <typename T>
DiscriminatorLoss pretrain_discriminator(StepScorer<T>& d, const Generator<T>& g,
                                         const std::vector<CountingExample>& train, const StrategyConfig& strategy,
                                         const TrainingConfig& cfg, Optimizer<T>& opt, Rng& rng, long steps,
                                         TrainingHistory* history = nullptr) {
  DiscriminatorLoss last;
  for (long s = 1; s <= steps; ++s) {
    Stopwatch clock;
    const auto batch = detail::sample_batch(train, cfg.batch_size, rng, cfg.max_len);
    const auto fakes = decode(g, batch.xs, nullptr, DecodeMode::kSample, &rng, cfg.max_len);
    auto grads = d.zero_grads();
    last = discriminator_loss(strategy, d, batch.xs, batch.answers, fakes, rng, &grads);
    detail::require_finite(last.loss, "discriminator pretraining loss", s);
    detail::require_finite(opt.step(d.params(), grads), "discriminator pretraining gradient", s);
    if (history) {
      HistoryRecord r;
      r["phase"] = "d_pretrain";
      r["iteration"] = s;
      r["d_loss"] = last.loss;
      r["d_real"] = last.mean_real;
      r["d_fake"] = last.mean_fake;
      history->add(std::move(r), clock.seconds());
    }
  }
  return last;
}

/// State of one adversarial run: the three networks, their optimizers, the
/// random stream and the iteration counter. `state()` / `restore()` capture
/// all of it, so a resumed run continues exactly as an uninterrupted one.
template <typename T>
class GanTrainer {
 public:
  GanTrainer(Generator<T> g, StepScorer<T> d, StepScorer<T> v, StrategyConfig strategy, TrainingConfig cfg,
             const std::vector<CountingExample>& train)
      : g_(std::move(g)),
        d_(std::move(d)),
        v_(std::move(v)),
        strategy_(strategy),
        cfg_(cfg),
        train_(&train),
        g_opt_(cfg.gan_optimizer()),
        d_opt_(cfg.gan_optimizer()),
        v_opt_(cfg.gan_optimizer()),
        rng_(mix_seed(cfg.seed, stream::kAdversarial)) {
    strategy_.validate();
    cfg_.validate();
    if (!strategy_.adversarial()) throw std::invalid_argument("GanTrainer: mle is not an adversarial strategy");
    if (train.empty()) throw std::invalid_argument("GanTrainer: empty training set");
  }

  /// Builds D and V with fresh weights seeded from cfg.seed.
  static GanTrainer fresh(Generator<T> g, StrategyConfig strategy, TrainingConfig cfg,
                          const std::vector<CountingExample>& train) {
    const ModelConfig mc = g.config();
    StepScorer<T> d(mc, ScorerRole::kDiscriminator, mix_seed(cfg.seed, stream::kDiscriminatorInit));
    StepScorer<T> v(mc, ScorerRole::kValue, mix_seed(cfg.seed, stream::kValueInit));
    return GanTrainer(std::move(g), std::move(d), std::move(v), strategy, cfg, train);
  }

  const Generator<T>& generator() const { return g_; }
  const StepScorer<T>& discriminator() const { return d_; }
  const StepScorer<T>& value() const { return v_; }
  Generator<T>& generator() { return g_; }
  StepScorer<T>& discriminator() { return d_; }
  StepScorer<T>& value() { return v_; }
  const StrategyConfig& strategy() const { return strategy_; }
  const TrainingConfig& config() const { return cfg_; }
  long iteration() const { return iteration_; }

  /// Discriminator (and optionally value) pretraining against the current G.
  void pretrain(TrainingHistory* history = nullptr) {
    pretrain_discriminator(d_, g_, *train_, strategy_, cfg_, d_opt_, rng_, cfg_.d_pretrain_steps, history);
    if (strategy_.baseline_enabled) {
      for (long s = 1; s <= cfg_.value_pretrain_steps; ++s) value_step(s, nullptr);
    }
  }

  /// One adversarial iteration.
  HistoryRecord step() {
    const long it = iteration_ + 1;
    HistoryRecord r;
    r["phase"] = "gan";
    r["iteration"] = it;

    double d_loss = 0.0, d_real = 0.0, d_fake = 0.0;
    detail::Batch batch;
    std::vector<TokenSequence> fakes;
    for (int k = 0; k < cfg_.d_iterations; ++k) {
      batch = detail::sample_batch(*train_, cfg_.batch_size, rng_, cfg_.max_len);
      fakes = decode(g_, batch.xs, nullptr, DecodeMode::kSample, &rng_, cfg_.max_len);
      auto grads = d_.zero_grads();
      const auto l = discriminator_loss(strategy_, d_, batch.xs, batch.answers, fakes, rng_, &grads);
      detail::require_finite(l.loss, "discriminator loss", it);
      detail::require_finite(d_opt_.step(d_.params(), grads), "discriminator gradient", it);
      d_loss += l.loss / cfg_.d_iterations;
      d_real += l.mean_real / cfg_.d_iterations;
      d_fake += l.mean_fake / cfg_.d_iterations;
    }
    r["d_loss"] = d_loss;
    r["d_real"] = d_real;
    r["d_fake"] = d_fake;

    if (strategy_.baseline_enabled) {
      // Regress V on the last fake batch, scored by the updated D.
      const double vl = update_value_network(v_, v_opt_, batch.xs, fakes, d_.scores(batch.xs, fakes));
      detail::require_finite(vl, "value loss", it);
      r["v_loss"] = vl;
    }

    double weight = 0.0, score = 0.0, norm = 0.0, length = 0.0;
    for (int k = 0; k < cfg_.g_iterations; ++k) {
      const auto xs = detail::sample_batch(*train_, cfg_.batch_size, rng_, cfg_.max_len).xs;
      auto up = generator_gradient(strategy_, g_, d_, strategy_.baseline_enabled ? &v_ : nullptr, xs, rng_,
                                   cfg_.max_len);
      detail::require_finite(up.mean_weight, "generator weight", it);
      detail::negate(up.gradient);  // the optimizer descends
      const double n = g_opt_.step(g_.params(), up.gradient);
      detail::require_finite(n, "generator gradient", it);
      weight += up.mean_weight / cfg_.g_iterations;
      score += up.mean_score / cfg_.g_iterations;
      norm += n / cfg_.g_iterations;
      double len = 0.0;
      for (const auto& s : up.samples) len += static_cast<double>(s.size());
      length += len / static_cast<double>(up.samples.size()) / cfg_.g_iterations;
    }
    r["g_weight"] = weight;
    r["g_score"] = score;
    r["g_grad_norm"] = norm;
    r["sample_len"] = length;
    iteration_ = it;
    return r;
  }

  std::vector<CheckpointSection> state() const {
    std::vector<CheckpointSection> s{model_section("generator", g_), model_section("discriminator", d_),
                                     model_section("value", v_), optimizer_section("generator", g_opt_),
                                     optimizer_section("discriminator", d_opt_), optimizer_section("value", v_opt_)};
    CheckpointSection t;
    t.kind = "trainer";
    t.attrs["name"] = "trainer";
    t.attrs["iteration"] = std::to_string(iteration_);
    t.attrs["strategy"] = to_string(strategy_.kind);
    t.tensors.push_back(text_blob("rng", serialize_rng(rng_)));
    s.push_back(std::move(t));
    return s;
  }

  void restore(const std::vector<CheckpointSection>& s) {
    const auto& t = find_section(s, "trainer", "trainer");
    if (t.attr("strategy") != to_string(strategy_.kind)) throw std::runtime_error("state belongs to another strategy");
    load_params(find_section(s, "model", "generator"), g_);
    load_params(find_section(s, "model", "discriminator"), d_);
    load_params(find_section(s, "model", "value"), v_);
    load_optimizer(find_section(s, "optimizer", "generator"), g_opt_);
    load_optimizer(find_section(s, "optimizer", "discriminator"), d_opt_);
    load_optimizer(find_section(s, "optimizer", "value"), v_opt_);
    iteration_ = std::stol(t.attr("iteration"));
    if (t.tensors.empty() || t.tensors.front().name != "rng") throw std::runtime_error("trainer state lacks rng");
    rng_ = deserialize_rng(t.tensors.front().bytes);
  }

 private:
  void value_step(long s, TrainingHistory*) {
    const auto batch = detail::sample_batch(*train_, cfg_.batch_size, rng_, cfg_.max_len);
    const auto fakes = decode(g_, batch.xs, nullptr, DecodeMode::kSample, &rng_, cfg_.max_len);
    detail::require_finite(update_value_network(v_, v_opt_, batch.xs, fakes, d_.scores(batch.xs, fakes)),
                           "value pretraining loss", s);
  }

  Generator<T> g_;
  StepScorer<T> d_;
  StepScorer<T> v_;
  StrategyConfig strategy_;
  TrainingConfig cfg_;
  const std::vector<CountingExample>* train_;
  Optimizer<T> g_opt_;
  Optimizer<T> d_opt_;
  Optimizer<T> v_opt_;
  Rng rng_;
  long iteration_ = 0;
};

/// Runs `trainer` up to cfg.total_iterations. `on_snapshot(iteration)` is
/// called every `snapshot_interval` iterations and after the last one.
template <typename T>
void train_gan(GanTrainer<T>& trainer, TrainingHistory& history, long snapshot_interval = 500,
               const std::function<void(long)>& on_snapshot = {}) {
  const long total = trainer.config().total_iterations;
  while (trainer.iteration() < total) {
    Stopwatch clock;
    auto r = trainer.step();
    history.add(std::move(r), clock.seconds());
    const long it = trainer.iteration();
    if (on_snapshot && ((snapshot_interval > 0 && it % snapshot_interval == 0) || it == total)) on_snapshot(it);
  }
}

}  // namespace stepgan
