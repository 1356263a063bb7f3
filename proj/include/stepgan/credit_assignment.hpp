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

// Stepwise credit assignment for sequence GANs.
//
// Every strategy defines two things: how the discriminator's per-step
// scalars Q(s_t, y_t) are reduced to the score D(x, y) it is trained on, and
// the weight w_t multiplying grad log P_G(y_t | x, y_<t) in the generator
// update. Weights are plain numbers; nothing flows back into D or V.
//
//   kind        D(x, y) for training        w_t
//   SEQGAN      Q_M                         Q_M
//   REGS        Q_tau, tau ~ U{1..M}        Q_t
//   MCTS        Q_M                         mean_i D(x, {y_1..t, z_i}), z_i ~ G
//   MASKGAN     every Q_t (summed BCE)      sum_{tau >= t} Q_tau
//   STEPGAN     mean_t Q_t                  Q_t - V_t
//   STEPGAN_W   mean_t Q_t                  (M - t + c)(Q_t - V_t)
//
// With baseline_enabled the non-StepGAN kinds also subtract V_t.

#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/decoding.hpp"
#include "stepgan/generator.hpp"
#include "stepgan/scorer.hpp"

namespace stepgan {

enum class StrategyKind { kMle, kSeqGan, kRegs, kMcts, kMaskGan, kStepGan, kStepGanW };
enum class AlphaSchedule { kUniform, kDecaying };
enum class Aggregation { kMean, kLast, kRandomStep, kAllSteps };

inline StrategyKind parse_strategy(const std::string& s) {
  if (s == "mle") return StrategyKind::kMle;
  if (s == "seqgan") return StrategyKind::kSeqGan;
  if (s == "regs") return StrategyKind::kRegs;
  if (s == "mcts") return StrategyKind::kMcts;
  if (s == "maskgan") return StrategyKind::kMaskGan;
  if (s == "stepgan") return StrategyKind::kStepGan;
  if (s == "stepgan_w") return StrategyKind::kStepGanW;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

inline std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::kMle: return "mle";
    case StrategyKind::kSeqGan: return "seqgan";
    case StrategyKind::kRegs: return "regs";
    case StrategyKind::kMcts: return "mcts";
    case StrategyKind::kMaskGan: return "maskgan";
    case StrategyKind::kStepGan: return "stepgan";
    case StrategyKind::kStepGanW: return "stepgan_w";
  }
  return "?";
}

inline Aggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return Aggregation::kMean;
  if (s == "last") return Aggregation::kLast;
  if (s == "random_step") return Aggregation::kRandomStep;
  if (s == "all_steps") return Aggregation::kAllSteps;
  throw std::invalid_argument("unknown aggregation '" + s + "'");
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kStepGan;
  int rollouts = 5;
  AlphaSchedule alpha = AlphaSchedule::kUniform;
  double alpha_offset = 0.0;  // decaying schedule: alpha_t = M - t + offset
  bool baseline_enabled = true;

  static StrategyConfig defaults(StrategyKind kind) {
    StrategyConfig c;
    c.kind = kind;
    c.alpha = kind == StrategyKind::kStepGanW ? AlphaSchedule::kDecaying : AlphaSchedule::kUniform;
    c.baseline_enabled = kind != StrategyKind::kSeqGan && kind != StrategyKind::kMle;
    return c;
  }

  void validate() const {
    if (rollouts < 1) throw std::invalid_argument("rollout count must be >= 1");
    if (alpha == AlphaSchedule::kDecaying && kind != StrategyKind::kStepGanW) {
      throw std::invalid_argument("decaying weights are only defined for stepgan_w");
    }
    if (kind == StrategyKind::kMle && baseline_enabled) throw std::invalid_argument("mle has no baseline");
  }

  bool adversarial() const { return kind != StrategyKind::kMle; }
};

inline Aggregation aggregation_for(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kSeqGan:
    case StrategyKind::kMcts: return Aggregation::kLast;
    case StrategyKind::kRegs: return Aggregation::kRandomStep;
    case StrategyKind::kMaskGan: return Aggregation::kAllSteps;
    case StrategyKind::kStepGan:
    case StrategyKind::kStepGanW: return Aggregation::kMean;
    case StrategyKind::kMle: break;
  }
  throw std::invalid_argument("mle has no discriminator");
}

/// Reduces per-step scores. Scalar aggregations return one element,
/// kAllSteps returns the scores unchanged.
inline StepScores aggregate_steps(const StepScores& q, Aggregation agg, Rng* rng = nullptr) {
  if (q.empty()) throw std::invalid_argument("aggregate_steps: empty scores");
  switch (agg) {
    case Aggregation::kMean: return {std::accumulate(q.begin(), q.end(), 0.0) / static_cast<double>(q.size())};
    case Aggregation::kLast: return {q.back()};
    case Aggregation::kRandomStep:
      if (!rng) throw std::invalid_argument("random_step aggregation needs an rng");
      return {q[uniform_index(*rng, q.size())]};
    case Aggregation::kAllSteps: return q;
  }
  throw std::invalid_argument("unknown aggregation");
}

/// D(x, y) under a scalar aggregation.
template <typename T>
double discriminator_score(const StepScorer<T>& d, const TokenSequence& x, const TokenSequence& y, Aggregation agg,
                           Rng* rng = nullptr) {
  if (agg == Aggregation::kAllSteps) throw std::invalid_argument("all_steps is not a scalar score; use discriminate_steps");
  return aggregate_steps(discriminate_steps(d, x, y), agg, rng).front();
}

// -- discriminator objective -------------------------------------------------

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// -log D(x, y) for a real pair (real = true) or -log(1 - D(x, y)) for a
/// fake one, with d(loss)/d(logit_t) written into `grad`.
inline double side_loss(Aggregation agg, std::span<const double> logits, std::size_t chosen, bool real,
                        std::span<double> grad) {
  const std::size_t M = logits.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  // For a real pair the loss on one logit a is softplus(-a), for a fake one
  // softplus(a); derivatives -sigmoid(-a) and sigmoid(a).
  auto single = [&](std::size_t t) {
    const double a = logits[t];
    grad[t] += real ? -sigmoid(-a) : sigmoid(a);
    return real ? softplus(-a) : softplus(a);
  };
  switch (agg) {
    case Aggregation::kLast: return single(M - 1);
    case Aggregation::kRandomStep: return single(chosen);
    case Aggregation::kAllSteps: {
      double loss = 0.0;
      for (std::size_t t = 0; t < M; ++t) loss += single(t);
      return loss;
    }
    case Aggregation::kMean: {
      // log D = logsumexp_t log sigmoid(a_t) - log M; 1 - D uses sigmoid(-a_t).
      std::vector<double> terms(M);
      for (std::size_t t = 0; t < M; ++t) terms[t] = real ? log_sigmoid(logits[t]) : log_sigmoid(-logits[t]);
      const double log_side = log_sum_exp(terms) - std::log(static_cast<double>(M));
      for (std::size_t t = 0; t < M; ++t) {
        const double a = logits[t];
        const double dside = std::exp(log_sigmoid(a) + log_sigmoid(-a) - std::log(static_cast<double>(M)) - log_side);
        grad[t] = real ? -dside : dside;
      }
      return -log_side;
    }
  }
  throw std::invalid_argument("unknown aggregation");
}

}  // namespace detail

struct DiscriminatorLoss {
  double loss = 0.0;       // mean over pairs of -[log D(x,y*) + log(1 - D(x,y^))]
  double mean_real = 0.0;  // mean aggregated score on real pairs
  double mean_fake = 0.0;
};

/// Batched discriminator objective. When `grads` is non-null the gradient of
/// the returned mean loss is accumulated into it.
template <typename T>
DiscriminatorLoss discriminator_loss(const StrategyConfig& cfg, const StepScorer<T>& d,
                                     const std::vector<TokenSequence>& xs, const std::vector<TokenSequence>& reals,
                                     const std::vector<TokenSequence>& fakes, Rng& rng,
                                     Seq2SeqParams<T>* grads = nullptr) {
  if (!cfg.adversarial()) throw std::invalid_argument("discriminator_loss: mle has no discriminator");
  if (xs.size() != reals.size() || xs.size() != fakes.size() || xs.empty()) {
    throw std::invalid_argument("discriminator_loss: batch size mismatch");
  }
  const Aggregation agg = aggregation_for(cfg.kind);
  const std::size_t B = xs.size();
  std::vector<TokenSequence> all_x(xs);
  all_x.insert(all_x.end(), xs.begin(), xs.end());
  std::vector<TokenSequence> all_y(reals);
  all_y.insert(all_y.end(), fakes.begin(), fakes.end());

  const auto pass = d.forward_pass(all_x, all_y);
  Matrix<double> d_logits = Matrix<double>::Zero(pass.logits.rows(), pass.logits.cols());
  DiscriminatorLoss out;
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t r = 0; r < 2 * B; ++r) {
    const bool real = r < B;
    const auto M = static_cast<std::size_t>(pass.lengths[r]);
    const std::size_t chosen = agg == Aggregation::kRandomStep ? uniform_index(rng, M) : M - 1;
    const std::span<const double> logits(pass.logits.row(static_cast<Index>(r)).data(), M);
    std::vector<double> g(M);
    out.loss += inv_b * detail::side_loss(agg, logits, chosen, real, g);
    for (std::size_t t = 0; t < M; ++t) d_logits(static_cast<Index>(r), static_cast<Index>(t)) = inv_b * g[t];

    double score = 0.0;
    if (agg == Aggregation::kMean || agg == Aggregation::kAllSteps) {
      for (double a : logits) score += sigmoid(a);
      score /= static_cast<double>(M);
    } else {
      score = sigmoid(logits[chosen]);
    }
    (real ? out.mean_real : out.mean_fake) += inv_b * score;
  }
  if (grads) d.backward_logits(pass, d_logits, *grads);
  return out;
}

/// Single-pair form.
template <typename T>
double discriminator_loss(const StrategyConfig& cfg, const StepScorer<T>& d, const TokenSequence& x,
                          const TokenSequence& y_real, const TokenSequence& y_fake, Rng& rng) {
  return discriminator_loss(cfg, d, std::vector<TokenSequence>{x}, std::vector<TokenSequence>{y_real},
                            std::vector<TokenSequence>{y_fake}, rng)
      .loss;
}

// -- Monte Carlo rollouts ----------------------------------------------------

inline bool is_complete(const TokenSequence& prefix, Token eos, int max_len) {
  return static_cast<int>(prefix.size()) >= max_len || (eos >= 0 && !prefix.empty() && prefix.back() == eos);
}

/// Q*(s_t, y_t) for each (x, prefix): the mean last-step discriminator score
/// of `rollouts` sampled completions. A complete prefix is scored directly.
template <typename T>
std::vector<double> rollout_values(const Generator<T>& g, const StepScorer<T>& d, const std::vector<TokenSequence>& xs,
                                   const std::vector<TokenSequence>& prefixes, int rollouts, Rng& rng, int max_len) {
  if (rollouts < 1) throw std::invalid_argument("rollout count must be >= 1");
  if (xs.size() != prefixes.size()) throw std::invalid_argument("rollout_values: size mismatch");
  std::vector<double> out(xs.size(), 0.0);
  std::vector<TokenSequence> done_x, done_y, roll_x, roll_prefix;
  std::vector<std::size_t> done_idx, roll_idx;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (is_complete(prefixes[i], g.eos_id(), max_len)) {
      done_idx.push_back(i);
      done_x.push_back(xs[i]);
      done_y.push_back(prefixes[i]);
    } else {
      roll_idx.push_back(i);
      for (int k = 0; k < rollouts; ++k) {
        roll_x.push_back(xs[i]);
        roll_prefix.push_back(prefixes[i]);
      }
    }
  }
  if (!done_x.empty()) {
    const auto q = d.scores(done_x, done_y);
    for (std::size_t j = 0; j < done_idx.size(); ++j) out[done_idx[j]] = q[j].back();
  }
  if (!roll_x.empty()) {
    const auto completed = decode(g, roll_x, &roll_prefix, DecodeMode::kSample, &rng, max_len);
    const auto q = d.scores(roll_x, completed);
    for (std::size_t j = 0; j < roll_idx.size(); ++j) {
      double s = 0.0;
      for (int k = 0; k < rollouts; ++k) s += q[j * static_cast<std::size_t>(rollouts) + static_cast<std::size_t>(k)].back();
      out[roll_idx[j]] = s / rollouts;
    }
  }
  return out;
}

template <typename T>
double mcts_rollout_value(const Generator<T>& g, const StepScorer<T>& d, const TokenSequence& x,
                          const TokenSequence& prefix, int rollouts, Rng& rng, int max_len = vocab::kDefaultMaxLen) {
  return rollout_values(g, d, {x}, {prefix}, rollouts, rng, max_len).front();
}

// -- generator weights -------------------------------------------------------

using StepWeights = std::vector<double>;

/// alpha_t for t = 1..M.
inline std::vector<double> alpha_weights(const StrategyConfig& cfg, std::size_t M) {
  std::vector<double> a(M, 1.0);
  if (cfg.alpha == AlphaSchedule::kDecaying) {
    for (std::size_t t = 1; t <= M; ++t) a[t - 1] = static_cast<double>(M) - static_cast<double>(t) + cfg.alpha_offset;
  }
  return a;
}

/// Weights from precomputed per-step discriminator scores `q`, baseline
/// values `v` (may be empty when the baseline is off) and, for MCTS,
/// rollout values `rolled`.
inline StepWeights combine_weights(const StrategyConfig& cfg, const StepScores& q, const StepScores& v,
                                   const std::vector<double>& rolled) {
  const std::size_t M = q.size();
  StepWeights w(M, 0.0);
  switch (cfg.kind) {
    case StrategyKind::kSeqGan:
      std::fill(w.begin(), w.end(), q.back());
      break;
    case StrategyKind::kRegs:
      w = q;
      break;
    case StrategyKind::kMcts:
      w = rolled;
      break;
    case StrategyKind::kMaskGan: {
      double tail = 0.0;
      for (std::size_t t = M; t-- > 0;) {
        tail += q[t];
        w[t] = tail;
      }
      break;
    }
    case StrategyKind::kStepGan:
    case StrategyKind::kStepGanW: {
      const auto alpha = alpha_weights(cfg, M);
      for (std::size_t t = 0; t < M; ++t) w[t] = alpha[t] * (q[t] - (cfg.baseline_enabled ? v[t] : 0.0));
      return w;
    }
    case StrategyKind::kMle: throw std::invalid_argument("mle has no step weights");
  }
  if (cfg.baseline_enabled) {
    for (std::size_t t = 0; t < M; ++t) w[t] -= v[t];
  }
  return w;
}

struct WeightedBatch {
  std::vector<StepWeights> weights;
  std::vector<StepScores> scores;  // discriminator Q per step
};

template <typename T>
WeightedBatch batch_step_weights(const StrategyConfig& cfg, const Generator<T>& g, const StepScorer<T>& d,
                                 const StepScorer<T>* v, const std::vector<TokenSequence>& xs,
                                 const std::vector<TokenSequence>& actions, Rng& rng, int max_len) {
  if (!cfg.adversarial()) throw std::invalid_argument("step_weights: mle has no step weights");
  if (cfg.baseline_enabled && v == nullptr) throw std::invalid_argument("step_weights: baseline requires a value network");
  for (const auto& a : actions) {
    if (a.empty()) throw std::invalid_argument("step_weights: empty sequence");
  }
  WeightedBatch out;
  out.scores = d.scores(xs, actions);
  std::vector<StepScores> values(xs.size());
  if (cfg.baseline_enabled) values = v->scores(xs, actions);

  std::vector<std::vector<double>> rolled(xs.size());
  if (cfg.kind == StrategyKind::kMcts) {
    std::vector<TokenSequence> px, prefixes;
    std::vector<std::pair<std::size_t, std::size_t>> where;
    for (std::size_t b = 0; b < xs.size(); ++b) {
      const std::size_t M = actions[b].size();
      rolled[b].assign(M, 0.0);
      rolled[b][M - 1] = out.scores[b].back();  // t = M: the sequence itself
      for (std::size_t t = 1; t < M; ++t) {
        px.push_back(xs[b]);
        prefixes.emplace_back(actions[b].begin(), actions[b].begin() + static_cast<std::ptrdiff_t>(t));
        where.emplace_back(b, t - 1);
      }
    }
    if (!px.empty()) {
      const auto vals = rollout_values(g, d, px, prefixes, cfg.rollouts, rng, max_len);
      for (std::size_t j = 0; j < where.size(); ++j) rolled[where[j].first][where[j].second] = vals[j];
    }
  }
  out.weights.reserve(xs.size());
  for (std::size_t b = 0; b < xs.size(); ++b) out.weights.push_back(combine_weights(cfg, out.scores[b], values[b], rolled[b]));
  return out;
}

template <typename T>
StepWeights step_weights(const StrategyConfig& cfg, const Generator<T>& g, const StepScorer<T>& d,
                         const StepScorer<T>* v, const TokenSequence& x, const TokenSequence& actions, Rng& rng,
                         int max_len = vocab::kDefaultMaxLen) {
  return batch_step_weights(cfg, g, d, v, {x}, {actions}, rng, max_len).weights.front();
}

/// (1/B) sum_b sum_t w_bt grad log P_G(a_bt | x_b, a_b,<t), the ascent
/// direction of the weighted log-likelihood.
template <typename T>
Seq2SeqParams<T> policy_gradient(const Generator<T>& g, const std::vector<TokenSequence>& xs,
                                 const std::vector<TokenSequence>& actions, const std::vector<StepWeights>& weights) {
  if (xs.size() != actions.size() || xs.size() != weights.size() || xs.empty()) {
    throw std::invalid_argument("policy_gradient: batch size mismatch");
  }
  const double inv_b = 1.0 / static_cast<double>(xs.size());
  std::vector<std::vector<double>> coef(weights.size());
  for (std::size_t b = 0; b < weights.size(); ++b) {
    if (weights[b].size() != actions[b].size()) throw std::invalid_argument("policy_gradient: weight length mismatch");
    coef[b].resize(weights[b].size());
    for (std::size_t t = 0; t < weights[b].size(); ++t) coef[b][t] = weights[b][t] * inv_b;
  }
  auto grads = g.zero_grads();
  g.accumulate_log_prob_gradient(g.forced(xs, actions), coef, grads);
  return grads;
}

template <typename T>
struct GeneratorUpdate {
  Seq2SeqParams<T> gradient;  // ascent direction, batch-averaged
  std::vector<TokenSequence> samples;
  double mean_weight = 0.0;
  double mean_score = 0.0;  // mean per-step discriminator score on samples
};

/// Samples fresh responses for `xs` and returns the weighted policy
/// gradient of the strategy.
template <typename T>
GeneratorUpdate<T> generator_gradient(const StrategyConfig& cfg, const Generator<T>& g, const StepScorer<T>& d,
                                      const StepScorer<T>* v, const std::vector<TokenSequence>& xs, Rng& rng,
                                      int max_len = vocab::kDefaultMaxLen) {
  GeneratorUpdate<T> up;
  up.samples = decode(g, xs, nullptr, DecodeMode::kSample, &rng, max_len);
  const auto wb = batch_step_weights(cfg, g, d, v, xs, up.samples, rng, max_len);
  double wsum = 0.0, ssum = 0.0;
  std::size_t n = 0;
  for (std::size_t b = 0; b < xs.size(); ++b) {
    for (std::size_t t = 0; t < wb.weights[b].size(); ++t) {
      wsum += wb.weights[b][t];
      ssum += wb.scores[b][t];
      ++n;
    }
  }
  up.mean_weight = n ? wsum / static_cast<double>(n) : 0.0;
  up.mean_score = n ? ssum / static_cast<double>(n) : 0.0;
  up.gradient = policy_gradient(g, xs, up.samples, wb.weights);
  return up;
}

}  // namespace stepgan
