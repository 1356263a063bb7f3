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

// Per-step scorers. The discriminator emits Q(s_t, y_t) in (0,1) after
// reading x and y_1..y_t. The value network has the same body but its step
// t reads only y_1..y_{t-1} (BOS first), so V(s_t) never sees the action it
// is a baseline for.

#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/seq2seq.hpp"

namespace stepgan {

using StepScores = std::vector<double>;

enum class ScorerRole { kDiscriminator, kValue };

inline const char* to_string(ScorerRole role) {
  return role == ScorerRole::kDiscriminator ? "discriminator" : "value";
}

template <typename T>
class StepScorer : public Seq2SeqNet<T> {
 public:
  struct Pass {
    Seq2SeqTrace<T> trace;
    Matrix<double> logits;  // B x steps; inactive entries are 0
    std::vector<int> lengths;
  };

  StepScorer(const ModelConfig& cfg, ScorerRole role, std::uint64_t seed)
      : Seq2SeqNet<T>(cfg, 1, seed), role_(role) {}

  ScorerRole role() const { return role_; }

  TokenBatch decoder_inputs(const std::vector<TokenSequence>& ys) const {
    if (role_ == ScorerRole::kDiscriminator) {
      for (const auto& y : ys) {
        if (y.empty()) throw std::invalid_argument("scorer: empty sequence");
      }
      return TokenBatch::from(ys);
    }
    std::vector<TokenSequence> shifted;
    shifted.reserve(ys.size());
    for (const auto& y : ys) {
      if (y.empty()) throw std::invalid_argument("scorer: empty sequence");
      TokenSequence s{this->cfg_.bos_id};
      s.insert(s.end(), y.begin(), y.end() - 1);
      shifted.push_back(std::move(s));
    }
    return TokenBatch::from(shifted);
  }

  Pass forward_pass(const std::vector<TokenSequence>& xs, const std::vector<TokenSequence>& ys) const {
    Pass p;
    p.trace = this->forward(TokenBatch::from(xs), decoder_inputs(ys));
    const Index B = static_cast<Index>(ys.size());
    const Index steps = p.trace.decoder_inputs.steps;
    p.logits = Matrix<double>::Zero(B, steps);
    p.lengths = p.trace.decoder_inputs.lengths;
    for (Index t = 0; t < steps; ++t) {
      for (Index r = 0; r < B; ++r) {
        if (p.trace.decoder_inputs.active(t, r)) {
          p.logits(r, t) = static_cast<double>(p.trace.head_out[static_cast<std::size_t>(t)](r, 0));
        }
      }
    }
    return p;
  }

  /// Squashed per-step scores, one vector of length |y| per pair.
  std::vector<StepScores> scores(const std::vector<TokenSequence>& xs, const std::vector<TokenSequence>& ys) const {
    return scores_from(forward_pass(xs, ys));
  }

  static std::vector<StepScores> scores_from(const Pass& p) {
    std::vector<StepScores> out(p.lengths.size());
    for (std::size_t r = 0; r < out.size(); ++r) {
      out[r].resize(static_cast<std::size_t>(p.lengths[r]));
      for (int t = 0; t < p.lengths[r]; ++t) out[r][static_cast<std::size_t>(t)] = sigmoid(p.logits(static_cast<Index>(r), t));
    }
    return out;
  }

  /// Accumulates parameter gradients from d(loss)/d(logit) per step.
  void backward_logits(const Pass& p, const Matrix<double>& d_logits, Seq2SeqParams<T>& grads) const {
    std::vector<Matrix<T>> d_head;
    const Index B = static_cast<Index>(p.lengths.size());
    for (Index t = 0; t < p.logits.cols(); ++t) {
      Matrix<T> d = Matrix<T>::Zero(B, 1);
      for (Index r = 0; r < B; ++r) {
        if (t < p.lengths[static_cast<std::size_t>(r)]) d(r, 0) = static_cast<T>(d_logits(r, t));
      }
      d_head.push_back(std::move(d));
    }
    this->backward(p.trace, d_head, grads);
  }

 private:
  ScorerRole role_;
};

/// Q(s_t, y_t) for t = 1..|y|.
template <typename T>
StepScores discriminate_steps(const StepScorer<T>& d, const TokenSequence& x, const TokenSequence& y) {
  return d.scores({x}, {y}).front();
}

/// V(s_t) for t = 1..|y|.
template <typename T>
StepScores value_estimates(const StepScorer<T>& v, const TokenSequence& x, const TokenSequence& y) {
  return v.scores({x}, {y}).front();
}

}  // namespace stepgan
