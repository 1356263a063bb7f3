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

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/seq2seq.hpp"

namespace stepgan {

enum class OptimizerKind { kSgd, kAdam, kRmsProp };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "rmsprop") return OptimizerKind::kRmsProp;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd, adam or rmsprop)");
}

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kRmsProp: return "rmsprop";
  }
  return "?";
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kRmsProp;
  double learning_rate = 1e-3;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables
};

/// First-order optimizer over one network. Moment buffers follow the
/// network's tensor order.
template <typename T>
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kRmsDecay = 0.9;
  static constexpr double kEpsilon = 1e-8;

  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    if (!(cfg_.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  }

  const OptimizerConfig& config() const { return cfg_; }
  long steps() const { return steps_; }

  /// Applies one descent step along `grads` (which is clipped in place).
  /// Returns the unclipped global gradient norm.
  double step(Seq2SeqParams<T>& params, Seq2SeqParams<T>& grads) {
    auto p = params.tensors();
    auto g = grads.tensors();
    const double norm = std::sqrt(squared_norm(g));
    if (!std::isfinite(norm)) return norm;
    if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) {
      const T scale = static_cast<T>(cfg_.clip_norm / norm);
      for (auto& t : g) *t.value *= scale;
    }
    if (first_.empty() && cfg_.kind != OptimizerKind::kSgd) {
      for (const auto& t : p) {
        first_.push_back(Matrix<T>::Zero(t.value->rows(), t.value->cols()));
        if (cfg_.kind == OptimizerKind::kAdam) second_.push_back(Matrix<T>::Zero(t.value->rows(), t.value->cols()));
      }
    }
    ++steps_;
    const T lr = static_cast<T>(cfg_.learning_rate);
    const T eps = static_cast<T>(kEpsilon);
    for (std::size_t i = 0; i < p.size(); ++i) {
      auto& w = *p[i].value;
      const auto& d = *g[i].value;
      switch (cfg_.kind) {
        case OptimizerKind::kSgd:
          w -= lr * d;
          break;
        case OptimizerKind::kRmsProp: {
          auto& ms = first_[i];
          ms = static_cast<T>(kRmsDecay) * ms + static_cast<T>(1.0 - kRmsDecay) * d.cwiseAbs2();
          w.array() -= lr * d.array() / (ms.array().sqrt() + eps);
          break;
        }
        case OptimizerKind::kAdam: {
          auto& m = first_[i];
          auto& v = second_[i];
          m = static_cast<T>(kBeta1) * m + static_cast<T>(1.0 - kBeta1) * d;
          v = static_cast<T>(kBeta2) * v + static_cast<T>(1.0 - kBeta2) * d.cwiseAbs2();
          const T c1 = static_cast<T>(1.0 - std::pow(kBeta1, static_cast<double>(steps_)));
          const T c2 = static_cast<T>(1.0 - std::pow(kBeta2, static_cast<double>(steps_)));
          w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
          break;
        }
      }
    }
    return norm;
  }

  // Buffers exposed for checkpointing.
  std::vector<Matrix<T>>& first_moments() { return first_; }
  std::vector<Matrix<T>>& second_moments() { return second_; }
  const std::vector<Matrix<T>>& first_moments() const { return first_; }
  const std::vector<Matrix<T>>& second_moments() const { return second_; }
  void set_steps(long s) { steps_ = s; }

 private:
  OptimizerConfig cfg_;
  long steps_ = 0;
  std::vector<Matrix<T>> first_;
  std::vector<Matrix<T>> second_;
};

}  // namespace stepgan
