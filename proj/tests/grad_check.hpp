// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference oracle. Analytic gradients from the layer
// backward passes are compared element-by-element against (L(x+h)-L(x-h))/2h
// at double precision. Test-only; never part of any production path.
#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "fgrf/nn.hpp"

namespace fgrf::testing {

struct GradCheckResult {
  double max_rel_err = 0.0;
  long checked = 0;
};

/// `loss` evaluates the scalar objective without touching gradients.
/// `backward` zeroes grads, runs forward+backward once, returns the loss.
/// All tensors referenced by `params` are perturbed in place.
inline GradCheckResult grad_check(const nn::ParamList<double>& params,
                                  const std::function<double()>& loss,
                                  const std::function<double()>& backward, double h = 1e-5,
                                  double tol = 1e-3) {
  nn::zero_grads(params);
  backward();
  // freeze analytic grads before the FD sweep perturbs state
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad->data);

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& value = *params[pi].value;
    for (long j = 0; j < value.numel(); ++j) {
      const double orig = value[j];
      const double an = analytic[pi][static_cast<std::size_t>(j)];
      double rel = 0.0;
      // a ReLU kink inside the +-h window makes central differences lie;
      // shrinking h converges for kink artifacts but not for real bugs
      for (double hh = h;; hh /= 8.0) {
        value[j] = orig + hh;
        const double lp = loss();
        value[j] = orig - hh;
        const double lm = loss();
        value[j] = orig;
        const double fd = (lp - lm) / (2.0 * hh);
        const double scale = std::max({std::abs(an), std::abs(fd), 1e-4});
        rel = std::abs(an - fd) / scale;
        if (rel <= tol || hh < h / 100.0) {
          if (rel > tol) {
            CAPTURE(params[pi].name);
            CAPTURE(j);
            CAPTURE(an);
            CAPTURE(fd);
          }
          break;
        }
      }
      if (rel > res.max_rel_err) res.max_rel_err = rel;
      ++res.checked;
      REQUIRE(rel <= tol);
    }
  }
  return res;
}

inline void fill_random(Tensor<double>& t, Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& v : t.data) v = rng.uniform(lo, hi);
}

}  // namespace fgrf::testing
