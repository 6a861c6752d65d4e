// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fgrf/nn.hpp"
#include "fgrf/tensor.hpp"

namespace fgrf::nn {

template <class T>
struct LossResult {
  T value;
  Tensor<T> grad;  // d(loss)/d(first argument)
};

/// Mean cross-entropy over the batch; grad is w.r.t. the logits.
template <class T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("cross_entropy: label count mismatch");
  Tensor<T> probs(logits.shape);
  softmax_rows(logits.ptr(), probs.ptr(), n, k);
  double loss = 0;
  Tensor<T> grad(logits.shape);
  for (int i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw std::out_of_range("cross_entropy: label out of range");
    const T p = probs.at2(i, y);
    loss -= std::log(static_cast<double>(p) + 1e-300);
    for (int j = 0; j < k; ++j)
      grad.at2(i, j) = (probs.at2(i, j) - (j == y ? T(1) : T(0))) / static_cast<T>(n);
  }
  return {static_cast<T>(loss / n), std::move(grad)};
}

/// KL(softmax(teacher/T) || softmax(student/T)), mean over the batch.
/// No temperature-squared factor here; dlkd applies that as a config flag.
/// grad is w.r.t. the student logits.
template <class T>
LossResult<T> kl_divergence(const Tensor<T>& teacher_logits, const Tensor<T>& student_logits,
                            T temperature) {
  if (temperature <= T(0)) throw std::invalid_argument("kl: temperature must be > 0");
  check_same_shape(teacher_logits.shape, student_logits.shape, "kl");
  const int n = teacher_logits.dim(0), k = teacher_logits.dim(1);
  for (long i = 0; i < teacher_logits.numel(); ++i)
    if (!std::isfinite(static_cast<double>(teacher_logits[i])) ||
        !std::isfinite(static_cast<double>(student_logits[i])))
      throw std::domain_error("kl: non-finite logits");
  Tensor<T> ts(teacher_logits.shape), ss(student_logits.shape);
  for (long i = 0; i < ts.numel(); ++i) {
    ts[i] = teacher_logits[i] / temperature;
    ss[i] = student_logits[i] / temperature;
  }
  Tensor<T> p(ts.shape), q(ss.shape);
  softmax_rows(ts.ptr(), p.ptr(), n, k);
  softmax_rows(ss.ptr(), q.ptr(), n, k);
  double loss = 0;
  Tensor<T> grad(ss.shape);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < k; ++j) {
      const double pij = static_cast<double>(p.at2(i, j));
      const double qij = static_cast<double>(q.at2(i, j));
      if (pij > 0) loss += pij * (std::log(pij) - std::log(qij + 1e-300));
      grad.at2(i, j) = (q.at2(i, j) - p.at2(i, j)) / (static_cast<T>(n) * temperature);
    }
  }
  return {static_cast<T>(loss / n), std::move(grad)};
}

/// Mean squared error over all elements; grad is w.r.t. `a`.
template <class T>
LossResult<T> mse(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a.shape, b.shape, "mse");
  const long n = a.numel();
  const T loss = kern::sqdiff_sum<T>(static_cast<int>(n), a.ptr(), b.ptr()) / static_cast<T>(n);
  Tensor<T> grad(a.shape);
  kern::vsub<T>(static_cast<int>(n), a.ptr(), b.ptr(), grad.ptr());
  kern::scal<T>(static_cast<int>(n), T(2) / static_cast<T>(n), grad.ptr());
  return {loss, std::move(grad)};
}

template <class T>
T accuracy(const Tensor<T>& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0), k = logits.dim(1);
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int arg = 0;
    for (int j = 1; j < k; ++j)
      if (logits.at2(i, j) > logits.at2(i, arg)) arg = j;
    if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<T>(correct) / static_cast<T>(n);
}

}  // namespace fgrf::nn
