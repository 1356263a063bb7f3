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

// Decoding, forced scoring and output-space enumeration, written against a
// minimal stepping interface so that exact reference policies and the GRU
// generator share one code path.

#include <cmath>
#include <concepts>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stepgan/random.hpp"
#include "stepgan/tensor.hpp"
#include "stepgan/vocabulary.hpp"

namespace stepgan {

/// A conditional autoregressive distribution exposed as batched states.
/// `start` yields one state row per input, positioned before the first
/// output token; `advance` consumes one token per row.
template <class P>
concept SequencePolicy = requires(const P& p, const std::vector<TokenSequence>& xs, const typename P::State& s,
                                  const std::vector<Index>& rows, const std::vector<Token>& tokens) {
  { p.vocab_size() } -> std::convertible_to<int>;
  { p.eos_id() } -> std::convertible_to<Token>;
  { p.start(xs) } -> std::same_as<typename P::State>;
  { p.next_probs(s) } -> std::same_as<Matrix<double>>;
  { p.select(s, rows) } -> std::same_as<typename P::State>;
  { p.advance(s, tokens) } -> std::same_as<typename P::State>;
};

enum class DecodeMode { kSample, kArgmax };

inline constexpr double kProbabilityFloor = 1e-12;

/// Highest-probability token, lowest id on ties.
inline Token argmax_token(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<Token>(best);
}

/// Generates one action sequence per input. Each sequence stops after EOS or
/// at `max_len` tokens, and includes the EOS when one was produced. When
/// `prefixes` is given, row b is forced to begin with prefixes[b] and only
/// the continuation is decoded.
template <SequencePolicy P>
std::vector<TokenSequence> decode(const P& policy, const std::vector<TokenSequence>& xs,
                                  const std::vector<TokenSequence>* prefixes, DecodeMode mode, Rng* rng,
                                  int max_len) {
  if (max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (mode == DecodeMode::kSample && rng == nullptr) throw std::invalid_argument("sampling requires an rng");
  if (prefixes && prefixes->size() != xs.size()) throw std::invalid_argument("prefix count mismatch");
  const Token eos = policy.eos_id();
  std::vector<TokenSequence> out(xs.size());
  if (xs.empty()) return out;
  if (prefixes) {
    for (const auto& p : *prefixes) {
      if (static_cast<int>(p.size()) > max_len) throw std::invalid_argument("prefix longer than max_len");
    }
  }

  auto state = policy.start(xs);
  std::vector<std::size_t> live(xs.size());
  std::iota(live.begin(), live.end(), std::size_t{0});
  const auto V = static_cast<std::size_t>(policy.vocab_size());

  for (int t = 0; t < max_len; ++t) {
    const Matrix<double> probs = policy.next_probs(state);
    std::vector<Index> keep_rows;
    std::vector<Token> keep_tokens;
    std::vector<std::size_t> next_live;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const std::size_t b = live[i];
      const std::span<const double> row(probs.row(static_cast<Index>(i)).data(), V);
      Token tok;
      if (prefixes && static_cast<std::size_t>(t) < (*prefixes)[b].size()) {
        tok = (*prefixes)[b][static_cast<std::size_t>(t)];
      } else if (mode == DecodeMode::kArgmax) {
        tok = argmax_token(row);
      } else {
        tok = static_cast<Token>(sample_categorical(*rng, row));
      }
      out[b].push_back(tok);
      const bool done = tok == eos || t + 1 == max_len;
      if (!done) {
        keep_rows.push_back(static_cast<Index>(i));
        keep_tokens.push_back(tok);
        next_live.push_back(b);
      }
    }
    if (next_live.empty()) break;
    state = policy.advance(policy.select(state, keep_rows), keep_tokens);
    live = std::move(next_live);
  }
  return out;
}

template <SequencePolicy P>
TokenSequence sample_response(const P& policy, const TokenSequence& x, Rng& rng, int max_len = vocab::kDefaultMaxLen) {
  auto a = decode(policy, {x}, nullptr, DecodeMode::kSample, &rng, max_len);
  TokenSequence y = std::move(a.front());
  if (policy.eos_id() >= 0 && !y.empty() && y.back() == policy.eos_id()) y.pop_back();
  return y;
}

template <SequencePolicy P>
TokenSequence decode_argmax(const P& policy, const TokenSequence& x, int max_len = vocab::kDefaultMaxLen) {
  auto a = decode(policy, {x}, nullptr, DecodeMode::kArgmax, nullptr, max_len);
  TokenSequence y = std::move(a.front());
  if (policy.eos_id() >= 0 && !y.empty() && y.back() == policy.eos_id()) y.pop_back();
  return y;
}

/// sum_t log max(P(a_t | x, a_<t), floor) for each (x, a) pair, where the a
/// are full action sequences.
template <SequencePolicy P>
std::vector<double> action_log_probs(const P& policy, const std::vector<TokenSequence>& xs,
                                     const std::vector<TokenSequence>& actions, double floor = kProbabilityFloor) {
  if (xs.size() != actions.size()) throw std::invalid_argument("input/action count mismatch");
  std::vector<double> out(xs.size(), 0.0);
  if (xs.empty()) return out;
  for (const auto& a : actions) {
    if (a.empty()) throw std::invalid_argument("action sequence must be non-empty");
  }
  auto state = policy.start(xs);
  std::vector<std::size_t> live(xs.size());
  std::iota(live.begin(), live.end(), std::size_t{0});
  for (std::size_t t = 0; !live.empty(); ++t) {
    const Matrix<double> probs = policy.next_probs(state);
    std::vector<Index> keep_rows;
    std::vector<Token> keep_tokens;
    std::vector<std::size_t> next_live;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const std::size_t b = live[i];
      const Token tok = actions[b][t];
      if (tok < 0 || tok >= policy.vocab_size()) throw std::out_of_range("token outside vocabulary");
      out[b] += std::log(std::max(probs(static_cast<Index>(i), tok), floor));
      if (t + 1 < actions[b].size()) {
        keep_rows.push_back(static_cast<Index>(i));
        keep_tokens.push_back(tok);
        next_live.push_back(b);
      }
    }
    if (next_live.empty()) break;
    state = policy.advance(policy.select(state, keep_rows), keep_tokens);
    live = std::move(next_live);
  }
  return out;
}

/// log P_G(y|x) for a response y (EOS appended unless y fills max_len).
template <SequencePolicy P>
double sequence_log_prob(const P& policy, const TokenSequence& x, const TokenSequence& y,
                         int max_len = vocab::kDefaultMaxLen) {
  TokenSequence a = y;
  const Token eos = policy.eos_id();
  if (eos >= 0 && (a.empty() || a.back() != eos) && static_cast<int>(a.size()) < max_len) a.push_back(eos);
  if (a.empty()) throw std::invalid_argument("sequence_log_prob: empty sequence");
  if (static_cast<int>(a.size()) > max_len) throw std::invalid_argument("sequence longer than max_len");
  return action_log_probs(policy, {x}, {a}).front();
}

struct WeightedSequence {
  TokenSequence actions;
  double prob;
};

/// Every action sequence the decoder can emit for `x` with its exact
/// probability (unfloored): EOS-terminated sequences of length 1..max_len and
/// the EOS-free sequences of length max_len.
template <SequencePolicy P>
std::vector<WeightedSequence> enumerate_outputs(const P& policy, const TokenSequence& x,
                                                int max_len = vocab::kDefaultMaxLen) {
  const Token eos = policy.eos_id();
  const int V = policy.vocab_size();
  std::vector<WeightedSequence> out;
  std::vector<WeightedSequence> frontier{{{}, 1.0}};
  auto state = policy.start({x});
  for (int depth = 0; depth < max_len; ++depth) {
    const Matrix<double> probs = policy.next_probs(state);
    std::vector<WeightedSequence> next;
    std::vector<Index> rows;
    std::vector<Token> tokens;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      for (Token tok = 0; tok < V; ++tok) {
        WeightedSequence s{frontier[i].actions, frontier[i].prob * probs(static_cast<Index>(i), tok)};
        s.actions.push_back(tok);
        if (tok == eos || depth + 1 == max_len) {
          out.push_back(std::move(s));
        } else {
          rows.push_back(static_cast<Index>(i));
          tokens.push_back(tok);
          next.push_back(std::move(s));
        }
      }
    }
    if (next.empty()) break;
    state = policy.advance(policy.select(state, rows), tokens);
    frontier = std::move(next);
  }
  return out;
}

}  // namespace stepgan
