// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "fgrf/nets.hpp"

namespace fgrf::testing {

/// Test-only velocity "net" computing an arbitrary closed-form field;
/// lets exactness contracts be checked against analytic solutions.
template <class T>
class CallbackVelocityNet final : public nets::VelocityNet<T> {
 public:
  using Fn = std::function<Tensor<T>(const Tensor<T>&, const std::vector<T>&,
                                     const std::vector<int>&)>;

  CallbackVelocityNet(std::vector<int> shape, int classes, Fn fn)
      : shape_(std::move(shape)), classes_(classes), fn_(std::move(fn)) {}

  Tensor<T> forward(const Tensor<T>& z, const std::vector<T>& t,
                    const std::vector<int>& y) override {
    return fn_(z, t, y);
  }
  void backward(const Tensor<T>&) override {}
  nets::ParamList<T> params() override { return {}; }
  std::string architecture_id() const override { return "callback"; }
  std::unique_ptr<nets::VelocityNet<T>> clone() const override {
    return std::make_unique<CallbackVelocityNet<T>>(*this);
  }
  std::vector<int> feature_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }

 private:
  std::vector<int> shape_;
  int classes_;
  Fn fn_;
};

}  // namespace fgrf::testing
