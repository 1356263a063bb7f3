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

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace stepgan {

using Index = Eigen::Index;

/// Row-major so that one batch row is contiguous.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Column = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct ScalarName;
template <>
struct ScalarName<float> {
  static constexpr const char* value = "float32";
};
template <>
struct ScalarName<double> {
  static constexpr const char* value = "float64";
};

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& a) {
  using T = typename Derived::Scalar;
  return (T(1) + (-a).exp()).inverse();
}

inline double sigmoid(double a) {
  return a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
}

/// log(1 + e^a) without overflow.
inline double softplus(double a) {
  return a > 0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

inline double log_sigmoid(double a) { return -softplus(-a); }

/// Row-wise softmax computed in double from logits of any precision.
template <typename T>
Matrix<double> softmax_rows(const Matrix<T>& logits) {
  Matrix<double> p = logits.template cast<double>();
  for (Index r = 0; r < p.rows(); ++r) {
    const double m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// Same, at the model precision; used in the training path.
template <typename T>
Matrix<T> softmax_rows_native(const Matrix<T>& logits) {
  Matrix<T> p(logits.rows(), logits.cols());
  for (Index r = 0; r < p.rows(); ++r) {
    const T m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// Named reference to one parameter array; the order of a model's list is
/// its serialization order.
template <typename T>
struct NamedTensor {
  std::string name;
  Matrix<T>* value;
};

template <typename T>
double squared_norm(const std::vector<NamedTensor<T>>& tensors) {
  double s = 0.0;
  for (const auto& t : tensors) s += t.value->template cast<double>().squaredNorm();
  return s;
}

}  // namespace stepgan
