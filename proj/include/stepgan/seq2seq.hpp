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

// Shared encoder-decoder body: one embedding table, a GRU encoder, a GRU
// decoder initialised from the final encoder state, and an affine head on
// every decoder state. The generator reads the head as vocabulary logits,
// the discriminator and value network read it as one logit per step.

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "stepgan/gru.hpp"
#include "stepgan/random.hpp"
#include "stepgan/tensor.hpp"
#include "stepgan/vocabulary.hpp"

namespace stepgan {

struct ModelConfig {
  int vocab_size = vocab::kSize;
  Token bos_id = vocab::kBos;
  Token eos_id = vocab::kEos;  // -1: no early termination
  int embed_dim = 64;
  int hidden_dim = 128;
  double init_scale = 0.08;

  bool has_eos() const { return eos_id >= 0; }

  void validate() const {
    if (vocab_size < 1) throw std::invalid_argument("vocab_size must be positive");
    if (bos_id < 0 || bos_id >= vocab_size) throw std::invalid_argument("bos_id out of range");
    if (eos_id >= vocab_size) throw std::invalid_argument("eos_id out of range");
    if (embed_dim < 1 || hidden_dim < 1) throw std::invalid_argument("layer sizes must be positive");
    if (!(init_scale >= 0.0)) throw std::invalid_argument("init_scale must be non-negative");
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Variable-length token sequences laid out step-major for batched decoding.
struct TokenBatch {
  Index rows = 0;
  Index steps = 0;
  std::vector<Token> ids;  // steps x rows
  std::vector<int> lengths;

  static TokenBatch from(const std::vector<TokenSequence>& seqs) {
    TokenBatch b;
    b.rows = static_cast<Index>(seqs.size());
    for (const auto& s : seqs) b.steps = std::max<Index>(b.steps, static_cast<Index>(s.size()));
    b.ids.assign(static_cast<std::size_t>(b.rows * b.steps), 0);
    b.lengths.reserve(seqs.size());
    for (Index r = 0; r < b.rows; ++r) {
      const auto& s = seqs[static_cast<std::size_t>(r)];
      b.lengths.push_back(static_cast<int>(s.size()));
      for (std::size_t t = 0; t < s.size(); ++t) b.ids[t * b.rows + r] = s[t];
    }
    return b;
  }

  Token at(Index t, Index r) const { return ids[static_cast<std::size_t>(t * rows + r)]; }
  bool active(Index t, Index r) const { return t < lengths[static_cast<std::size_t>(r)]; }

  template <typename T>
  Column<T> mask(Index t) const {
    Column<T> m(rows);
    for (Index r = 0; r < rows; ++r) m(r) = active(t, r) ? T(1) : T(0);
    return m;
  }
};

template <typename T>
struct Seq2SeqParams {
  Matrix<T> embedding;  // V x E
  GruWeights<T> encoder;
  GruWeights<T> decoder;
  Matrix<T> head_kernel;  // H x O
  Matrix<T> head_bias;    // 1 x O

  static Seq2SeqParams zeros(const ModelConfig& cfg, Index out_dim) {
    return {Matrix<T>::Zero(cfg.vocab_size, cfg.embed_dim),
            GruWeights<T>::zeros(cfg.embed_dim, cfg.hidden_dim),
            GruWeights<T>::zeros(cfg.embed_dim, cfg.hidden_dim),
            Matrix<T>::Zero(cfg.hidden_dim, out_dim), Matrix<T>::Zero(1, out_dim)};
  }

  std::vector<NamedTensor<T>> tensors() {
    std::vector<NamedTensor<T>> out;
    out.push_back({"embedding", &embedding});
    encoder.collect("encoder", out);
    decoder.collect("decoder", out);
    out.push_back({"head.kernel", &head_kernel});
    out.push_back({"head.bias", &head_bias});
    return out;
  }

  std::vector<NamedTensor<T>> tensors() const {
    return const_cast<Seq2SeqParams*>(this)->tensors();
  }

  void set_zero() {
    for (auto& t : tensors()) t.value->setZero();
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += static_cast<std::size_t>(t.value->size());
    return n;
  }
};

template <typename T>
struct Seq2SeqTrace {
  TokenBatch source;
  TokenBatch decoder_inputs;
  std::vector<GruStepCache<T>> encoder_steps;
  std::vector<GruStepCache<T>> decoder_steps;
  std::vector<Matrix<T>> decoder_hidden;  // per step, B x H
  std::vector<Matrix<T>> head_out;        // per step, B x O
};

template <typename T>
class Seq2SeqNet {
 public:
  using Scalar = T;

  Seq2SeqNet(const ModelConfig& cfg, Index out_dim, std::uint64_t seed) : cfg_(cfg), out_dim_(out_dim) {
    cfg_.validate();
    params_ = Seq2SeqParams<T>::zeros(cfg_, out_dim_);
    Rng rng(seed);
    for (auto& t : params_.tensors()) {
      for (Index i = 0; i < t.value->size(); ++i) {
        t.value->data()[i] = static_cast<T>((2.0 * uniform01(rng) - 1.0) * cfg_.init_scale);
      }
    }
  }

  const ModelConfig& config() const { return cfg_; }
  Index out_dim() const { return out_dim_; }
  Seq2SeqParams<T>& params() { return params_; }
  const Seq2SeqParams<T>& params() const { return params_; }
  Seq2SeqParams<T> zero_grads() const { return Seq2SeqParams<T>::zeros(cfg_, out_dim_); }

  Matrix<T> embed(const TokenBatch& batch, Index t) const {
    Matrix<T> x = Matrix<T>::Zero(batch.rows, cfg_.embed_dim);
    for (Index r = 0; r < batch.rows; ++r) {
      if (batch.active(t, r)) x.row(r) = params_.embedding.row(checked(batch.at(t, r)));
    }
    return x;
  }

  Matrix<T> embed_tokens(const std::vector<Token>& tokens) const {
    Matrix<T> x(static_cast<Index>(tokens.size()), cfg_.embed_dim);
    for (std::size_t r = 0; r < tokens.size(); ++r) x.row(static_cast<Index>(r)) = params_.embedding.row(checked(tokens[r]));
    return x;
  }

  /// Final encoder state for each source row.
  Matrix<T> encode(const TokenBatch& source, std::vector<GruStepCache<T>>* caches = nullptr) const {
    Matrix<T> h = Matrix<T>::Zero(source.rows, cfg_.hidden_dim);
    if (caches) caches->resize(static_cast<std::size_t>(source.steps));
    for (Index t = 0; t < source.steps; ++t) {
      h = gru_step(params_.encoder, embed(source, t), h, source.template mask<T>(t),
                   caches ? &(*caches)[static_cast<std::size_t>(t)] : nullptr);
    }
    return h;
  }

  Matrix<T> decoder_step(const Matrix<T>& input, const Matrix<T>& h) const {
    const Column<T> ones = Column<T>::Ones(h.rows());
    return gru_step(params_.decoder, input, h, ones);
  }

  Matrix<T> head(const Matrix<T>& hidden) const {
    Matrix<T> out = hidden * params_.head_kernel;
    out.rowwise() += params_.head_bias.row(0);
    return out;
  }

  /// Full teacher-forced pass: encode `source`, feed `decoder_inputs` one
  /// step at a time and apply the head to each decoder state.
  Seq2SeqTrace<T> forward(const TokenBatch& source, const TokenBatch& decoder_inputs) const {
    if (source.rows != decoder_inputs.rows) throw std::invalid_argument("batch row mismatch");
    Seq2SeqTrace<T> tr;
    tr.source = source;
    tr.decoder_inputs = decoder_inputs;
    Matrix<T> h = encode(source, &tr.encoder_steps);
    tr.decoder_steps.resize(static_cast<std::size_t>(decoder_inputs.steps));
    for (Index t = 0; t < decoder_inputs.steps; ++t) {
      h = gru_step(params_.decoder, embed(decoder_inputs, t), h, decoder_inputs.template mask<T>(t),
                   &tr.decoder_steps[static_cast<std::size_t>(t)]);
      tr.decoder_hidden.push_back(h);
      tr.head_out.push_back(head(h));
    }
    return tr;
  }

  /// Accumulates parameter gradients given d(loss)/d(head output) per step.
  /// Entries at inactive positions must be zero.
  void backward(const Seq2SeqTrace<T>& tr, const std::vector<Matrix<T>>& d_head, Seq2SeqParams<T>& grads) const {
    const Index B = tr.source.rows;
    Matrix<T> carry = Matrix<T>::Zero(B, cfg_.hidden_dim);
    Matrix<T> d_input;
    for (Index t = tr.decoder_inputs.steps - 1; t >= 0; --t) {
      const auto& dh = d_head[static_cast<std::size_t>(t)];
      const auto& hidden = tr.decoder_hidden[static_cast<std::size_t>(t)];
      grads.head_kernel.noalias() += hidden.transpose() * dh;
      grads.head_bias += dh.colwise().sum();
      carry.noalias() += dh * params_.head_kernel.transpose();
      carry = gru_step_backward(params_.decoder, tr.decoder_steps[static_cast<std::size_t>(t)], carry,
                                grads.decoder, d_input);
      scatter_embedding(tr.decoder_inputs, t, d_input, grads);
    }
    for (Index t = tr.source.steps - 1; t >= 0; --t) {
      carry = gru_step_backward(params_.encoder, tr.encoder_steps[static_cast<std::size_t>(t)], carry,
                                grads.encoder, d_input);
      scatter_embedding(tr.source, t, d_input, grads);
    }
  }

 protected:
  Index checked(Token id) const {
    if (id < 0 || id >= cfg_.vocab_size) throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
    return id;
  }

  void scatter_embedding(const TokenBatch& batch, Index t, const Matrix<T>& d_input, Seq2SeqParams<T>& grads) const {
    for (Index r = 0; r < batch.rows; ++r) {
      if (batch.active(t, r)) grads.embedding.row(batch.at(t, r)) += d_input.row(r);
    }
  }

  ModelConfig cfg_;
  Index out_dim_;
  Seq2SeqParams<T> params_;
};

}  // namespace stepgan
