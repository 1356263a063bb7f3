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

#include <stdexcept>
#include <vector>

#include "stepgan/seq2seq.hpp"

namespace stepgan {

/// Action sequence for a response: the response plus the terminating EOS,
/// unless the response already fills `max_len` (truncated, no EOS emitted).
inline TokenSequence to_actions(const TokenSequence& response, int max_len, Token eos) {
  TokenSequence a = response;
  if (eos >= 0 && (a.empty() || a.back() != eos) && static_cast<int>(a.size()) < max_len) a.push_back(eos);
  return a;
}

/// Drops a trailing EOS.
inline TokenSequence strip_eos(TokenSequence actions, Token eos) {
  if (eos >= 0 && !actions.empty() && actions.back() == eos) actions.pop_back();
  return actions;
}

/// Autoregressive conditional generator P_G(y|x).
///
/// Decoder step t consumes BOS (t = 0) or y_{t-1} and emits a softmax over
/// the whole vocabulary.
template <typename T>
class Generator : public Seq2SeqNet<T> {
 public:
  struct State {
    Matrix<T> hidden;
  };

  /// Teacher-forced pass over given action sequences.
  struct ForcedPass {
    Seq2SeqTrace<T> trace;
    TokenBatch targets;
    std::vector<Matrix<T>> probs;  // per step, B x V
  };

  Generator(const ModelConfig& cfg, std::uint64_t seed) : Seq2SeqNet<T>(cfg, cfg.vocab_size, seed) {}

  int vocab_size() const { return this->cfg_.vocab_size; }
  Token eos_id() const { return this->cfg_.eos_id; }

  // -- stepping interface (see decoding.hpp) --------------------------------

  State start(const std::vector<TokenSequence>& xs) const {
    const TokenBatch src = TokenBatch::from(xs);
    Matrix<T> h = this->encode(src);
    const std::vector<Token> bos(xs.size(), this->cfg_.bos_id);
    return {this->decoder_step(this->embed_tokens(bos), h)};
  }

  Matrix<double> next_probs(const State& s) const { return softmax_rows(this->head(s.hidden)); }

  State select(const State& s, const std::vector<Index>& rows) const { return {s.hidden(rows, Eigen::all)}; }

  State advance(const State& s, const std::vector<Token>& tokens) const {
    return {this->decoder_step(this->embed_tokens(tokens), s.hidden)};
  }

  // -- training interface ----------------------------------------------------

  TokenBatch decoder_inputs(const std::vector<TokenSequence>& actions) const {
    std::vector<TokenSequence> shifted;
    shifted.reserve(actions.size());
    for (const auto& a : actions) {
      if (a.empty()) throw std::invalid_argument("generator: empty action sequence");
      TokenSequence s{this->cfg_.bos_id};
      s.insert(s.end(), a.begin(), a.end() - 1);
      shifted.push_back(std::move(s));
    }
    return TokenBatch::from(shifted);
  }

  ForcedPass forced(const std::vector<TokenSequence>& xs, const std::vector<TokenSequence>& actions) const {
    ForcedPass p;
    p.trace = this->forward(TokenBatch::from(xs), decoder_inputs(actions));
    p.targets = TokenBatch::from(actions);
    p.probs.reserve(p.trace.head_out.size());
    for (const auto& logits : p.trace.head_out) p.probs.push_back(softmax_rows_native(logits));
    return p;
  }

  /// Per-sequence sum of log P(y_t | x, y_<t) from a forced pass.
  std::vector<double> log_probs(const ForcedPass& p, double floor = 1e-12) const {
    std::vector<double> out(static_cast<std::size_t>(p.targets.rows), 0.0);
    for (Index t = 0; t < p.targets.steps; ++t) {
      for (Index r = 0; r < p.targets.rows; ++r) {
        if (!p.targets.active(t, r)) continue;
        const double prob = static_cast<double>(p.probs[static_cast<std::size_t>(t)](r, p.targets.at(t, r)));
        out[static_cast<std::size_t>(r)] += std::log(std::max(prob, floor));
      }
    }
    return out;
  }

  /// Accumulates the gradient of sum_{b,t} coef[b][t] * log P(y_bt | ...)
  /// into `grads`.
  void accumulate_log_prob_gradient(const ForcedPass& p, const std::vector<std::vector<double>>& coef,
                                    Seq2SeqParams<T>& grads) const {
    std::vector<Matrix<T>> d_head;
    d_head.reserve(static_cast<std::size_t>(p.targets.steps));
    for (Index t = 0; t < p.targets.steps; ++t) {
      Matrix<T> d = Matrix<T>::Zero(p.targets.rows, this->cfg_.vocab_size);
      for (Index r = 0; r < p.targets.rows; ++r) {
        if (!p.targets.active(t, r)) continue;
        const T c = static_cast<T>(coef[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)]);
        if (c == T(0)) continue;
        d.row(r) = -c * p.probs[static_cast<std::size_t>(t)].row(r);
        d(r, p.targets.at(t, r)) += c;
      }
      d_head.push_back(std::move(d));
    }
    this->backward(p.trace, d_head, grads);
  }
};

}  // namespace stepgan
