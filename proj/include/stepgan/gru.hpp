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

// Batched gated recurrent unit with an explicit backward pass.
//
//   r  = sigmoid(x Wi_r + bi_r + h Wh_r + bh_r)
//   z  = sigmoid(x Wi_z + bi_z + h Wh_z + bh_z)
//   n  = tanh(x Wi_n + bi_n + r * (h Wh_n + bh_n))
//   h' = (1 - z) * n + z * h
//
// Rows whose mask is 0 carry their previous state through unchanged, which
// is how variable-length batches are handled.

#include <string>
#include <vector>

#include "stepgan/tensor.hpp"

namespace stepgan {

template <typename T>
struct GruWeights {
  Matrix<T> input_kernel;   // E x 3H, gate blocks [reset | update | candidate]
  Matrix<T> hidden_kernel;  // H x 3H
  Matrix<T> input_bias;     // 1 x 3H
  Matrix<T> hidden_bias;    // 1 x 3H

  static GruWeights zeros(Index input_dim, Index hidden_dim) {
    return {Matrix<T>::Zero(input_dim, 3 * hidden_dim), Matrix<T>::Zero(hidden_dim, 3 * hidden_dim),
            Matrix<T>::Zero(1, 3 * hidden_dim), Matrix<T>::Zero(1, 3 * hidden_dim)};
  }

  Index hidden_dim() const { return hidden_kernel.rows(); }

  void collect(const std::string& prefix, std::vector<NamedTensor<T>>& out) {
    out.push_back({prefix + ".input_kernel", &input_kernel});
    out.push_back({prefix + ".hidden_kernel", &hidden_kernel});
    out.push_back({prefix + ".input_bias", &input_bias});
    out.push_back({prefix + ".hidden_bias", &hidden_bias});
  }
};

/// Activations kept for the backward pass of one step.
template <typename T>
struct GruStepCache {
  Matrix<T> input;
  Matrix<T> h_prev;
  Matrix<T> reset;
  Matrix<T> update;
  Matrix<T> candidate;
  Matrix<T> hidden_candidate;  // h Wh_n + bh_n
  Column<T> mask;
};

template <typename T>
Matrix<T> gru_step(const GruWeights<T>& w, const Matrix<T>& x, const Matrix<T>& h, const Column<T>& mask,
                   GruStepCache<T>* cache = nullptr) {
  const Index H = w.hidden_dim();
  Matrix<T> gi = x * w.input_kernel;
  gi.rowwise() += w.input_bias.row(0);
  Matrix<T> gh = h * w.hidden_kernel;
  gh.rowwise() += w.hidden_bias.row(0);

  Matrix<T> r = sigmoid((gi.leftCols(H) + gh.leftCols(H)).array()).matrix();
  Matrix<T> z = sigmoid((gi.middleCols(H, H) + gh.middleCols(H, H)).array()).matrix();
  Matrix<T> ghn = gh.rightCols(H);
  Matrix<T> n = (gi.rightCols(H).array() + r.array() * ghn.array()).tanh().matrix();

  Matrix<T> out = n.array() + z.array() * (h.array() - n.array());
  // out = h + mask * (h' - h)
  out = h.array() + (out.array() - h.array()).colwise() * mask.array();

  if (cache) {
    cache->input = x;
    cache->h_prev = h;
    cache->reset = std::move(r);
    cache->update = std::move(z);
    cache->candidate = std::move(n);
    cache->hidden_candidate = std::move(ghn);
    cache->mask = mask;
  }
  return out;
}

/// Backpropagates d(out) through one step. Accumulates weight gradients into
/// `grads`, writes the input gradient to `d_input` and returns d(h_prev).
template <typename T>
Matrix<T> gru_step_backward(const GruWeights<T>& w, const GruStepCache<T>& c, const Matrix<T>& d_out,
                            GruWeights<T>& grads, Matrix<T>& d_input) {
  const Index H = w.hidden_dim();
  const Index B = d_out.rows();
  const auto& r = c.reset.array();
  const auto& z = c.update.array();
  const auto& n = c.candidate.array();

  Matrix<T> d_h = (d_out.array().colwise() * c.mask.array()).matrix();
  Matrix<T> d_prev = (d_out.array().colwise() * (T(1) - c.mask.array())).matrix();

  Matrix<T> d_gi(B, 3 * H);
  Matrix<T> d_gh(B, 3 * H);
  auto dn_pre = (d_h.array() * (T(1) - z) * (T(1) - n * n)).eval();
  auto dz_pre = (d_h.array() * (c.h_prev.array() - n) * z * (T(1) - z)).eval();
  auto dr_pre = (dn_pre * c.hidden_candidate.array() * r * (T(1) - r)).eval();
  d_gi.leftCols(H) = dr_pre.matrix();
  d_gi.middleCols(H, H) = dz_pre.matrix();
  d_gi.rightCols(H) = dn_pre.matrix();
  d_gh.leftCols(H) = dr_pre.matrix();
  d_gh.middleCols(H, H) = dz_pre.matrix();
  d_gh.rightCols(H) = (dn_pre * r).matrix();

  d_prev.array() += d_h.array() * z;

  grads.input_kernel.noalias() += c.input.transpose() * d_gi;
  grads.hidden_kernel.noalias() += c.h_prev.transpose() * d_gh;
  grads.input_bias += d_gi.colwise().sum();
  grads.hidden_bias += d_gh.colwise().sum();

  d_input.noalias() = d_gi * w.input_kernel.transpose();
  d_prev.noalias() += d_gh * w.hidden_kernel.transpose();
  return d_prev;
}

}  // namespace stepgan
