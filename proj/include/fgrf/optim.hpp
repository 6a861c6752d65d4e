// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgrf/nn.hpp"

namespace fgrf::nn {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd|adam)");
}

/// Plain SGD (the default update) with optional Adam behind the same
/// interface. step() consumes the accumulated grads and zeroes them.
template <class T>
class Optimizer {
 public:
  Optimizer(ParamList<T> params, OptimizerKind kind, T lr)
      : params_(std::move(params)), kind_(kind), lr_(lr) {
    if (lr <= T(0)) throw std::invalid_argument("optimizer: learning rate must be > 0");
    if (kind_ == OptimizerKind::adam) {
      m_.resize(params_.size());
      v_.resize(params_.size());
      for (std::size_t i = 0; i < params_.size(); ++i) {
        m_[i] = Tensor<T>::zeros_like(*params_[i].value);
        v_[i] = Tensor<T>::zeros_like(*params_[i].value);
      }
    }
  }

  void step() {
    if (kind_ == OptimizerKind::sgd) {
      for (auto& p : params_)
        kern::axpy<T>(static_cast<int>(p.value->numel()), -lr_, p.grad->ptr(),
                      p.value->ptr());
    } else {
      ++t_;
      const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double bc1 = 1.0 - std::pow(b1, t_);
      const double bc2 = 1.0 - std::pow(b2, t_);
      for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = params_[i];
        T* m = m_[i].ptr();
        T* v = v_[i].ptr();
        const T* g = p.grad->ptr();
        T* w = p.value->ptr();
        for (long j = 0; j < p.value->numel(); ++j) {
          m[j] = static_cast<T>(b1 * m[j] + (1.0 - b1) * g[j]);
          v[j] = static_cast<T>(b2 * v[j] + (1.0 - b2) * g[j] * g[j]);
          const double mh = m[j] / bc1;
          const double vh = v[j] / bc2;
          w[j] -= static_cast<T>(lr_ * mh / (std::sqrt(vh) + eps));
        }
      }
    }
    zero_grads(params_);
  }

  void zero() { zero_grads(params_); }
  T learning_rate() const { return lr_; }

 private:
  ParamList<T> params_;
  OptimizerKind kind_;
  T lr_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

}  // namespace fgrf::nn
