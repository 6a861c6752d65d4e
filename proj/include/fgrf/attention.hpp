// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fgrf/nn.hpp"

namespace fgrf::nn {

/// Multi-head self-attention over [N, S, D] token grids.
template <class T>
class MultiheadSelfAttention {
 public:
  MultiheadSelfAttention() = default;
  MultiheadSelfAttention(int dim, int heads, Rng& rng)
      : dim_(dim), heads_(heads), head_dim_(dim / heads) {
    if (dim % heads != 0) throw std::invalid_argument("attention: dim % heads != 0");
    q_ = Linear<T>(dim, dim, rng);
    k_ = Linear<T>(dim, dim, rng);
    v_ = Linear<T>(dim, dim, rng);
    o_ = Linear<T>(dim, dim, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    n_ = x.dim(0);
    s_ = x.dim(1);
    const auto flat = x.reshaped({n_ * s_, dim_});
    q_out_ = q_.forward(flat);
    k_out_ = k_.forward(flat);
    v_out_ = v_.forward(flat);
    probs_ = Tensor<T>({n_, heads_, s_, s_});
    Tensor<T> ctx({n_ * s_, dim_});
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim_)));
    std::vector<T> qh(static_cast<std::size_t>(s_) * head_dim_), kh(qh.size()), vh(qh.size()),
        oh(qh.size());
    std::vector<T> scores(static_cast<std::size_t>(s_) * s_);
    for (int b = 0; b < n_; ++b) {
      for (int h = 0; h < heads_; ++h) {
        gather_head(q_out_, b, h, qh.data());
        gather_head(k_out_, b, h, kh.data());
        gather_head(v_out_, b, h, vh.data());
        kern::gemm_nt<T>(qh.data(), kh.data(), scores.data(), s_, s_, head_dim_, false);
        kern::scal<T>(s_ * s_, scale, scores.data());
        T* p = probs_.ptr() + ((static_cast<long>(b) * heads_ + h) * s_) * s_;
        softmax_rows(scores.data(), p, s_, s_);
        kern::gemm_nn<T>(p, vh.data(), oh.data(), s_, head_dim_, s_, false);
        scatter_head(oh.data(), b, h, ctx);
      }
    }
    auto y = o_.forward(ctx);
    return y.reshaped({n_, s_, dim_});
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    auto dctx = o_.backward(dy.reshaped({n_ * s_, dim_}));
    Tensor<T> dq({n_ * s_, dim_}), dk({n_ * s_, dim_}), dv({n_ * s_, dim_});
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim_)));
    std::vector<T> qh(static_cast<std::size_t>(s_) * head_dim_), kh(qh.size()), vh(qh.size()),
        doh(qh.size()), dqh(qh.size()), dkh(qh.size()), dvh(qh.size());
    std::vector<T> dp(static_cast<std::size_t>(s_) * s_), ds(dp.size());
    for (int b = 0; b < n_; ++b) {
      for (int h = 0; h < heads_; ++h) {
        gather_head(q_out_, b, h, qh.data());
        gather_head(k_out_, b, h, kh.data());
        gather_head(v_out_, b, h, vh.data());
        gather_head(dctx, b, h, doh.data());
        const T* p = probs_.ptr() + ((static_cast<long>(b) * heads_ + h) * s_) * s_;
        // dP = dO V^T ; dV = P^T dO
        kern::gemm_nt<T>(doh.data(), vh.data(), dp.data(), s_, s_, head_dim_, false);
        kern::gemm_tn<T>(p, doh.data(), dvh.data(), s_, head_dim_, s_, false);
        // softmax jacobian: dS_ij = P_ij (dP_ij - sum_j' dP_ij' P_ij')
        for (int i = 0; i < s_; ++i) {
          const T* prow = p + static_cast<long>(i) * s_;
          const T* dprow = dp.data() + static_cast<long>(i) * s_;
          T dotv = kern::dot<T>(s_, dprow, prow);
          T* dsrow = ds.data() + static_cast<long>(i) * s_;
          for (int j = 0; j < s_; ++j) dsrow[j] = prow[j] * (dprow[j] - dotv);
        }
        kern::scal<T>(s_ * s_, scale, ds.data());
        kern::gemm_nn<T>(ds.data(), kh.data(), dqh.data(), s_, head_dim_, s_, false);
        kern::gemm_tn<T>(ds.data(), qh.data(), dkh.data(), s_, head_dim_, s_, false);
        scatter_head(dqh.data(), b, h, dq);
        scatter_head(dkh.data(), b, h, dk);
        scatter_head(dvh.data(), b, h, dv);
      }
    }
    auto dx = q_.backward(dq);
    auto dxk = k_.backward(dk);
    auto dxv = v_.backward(dv);
    kern::vadd<T>(static_cast<int>(dx.numel()), dx.ptr(), dxk.ptr(), dx.ptr());
    kern::vadd<T>(static_cast<int>(dx.numel()), dx.ptr(), dxv.ptr(), dx.ptr());
    return dx.reshaped({n_, s_, dim_});
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    q_.collect_params(prefix + ".q", out);
    k_.collect_params(prefix + ".k", out);
    v_.collect_params(prefix + ".v", out);
    o_.collect_params(prefix + ".o", out);
  }

 private:
  void gather_head(const Tensor<T>& src, int b, int h, T* dst) const {
    for (int i = 0; i < s_; ++i)
      std::copy_n(src.ptr() + (static_cast<long>(b) * s_ + i) * dim_ + h * head_dim_, head_dim_,
                  dst + static_cast<long>(i) * head_dim_);
  }
  void scatter_head(const T* src, int b, int h, Tensor<T>& dst) const {
    for (int i = 0; i < s_; ++i)
      std::copy_n(src + static_cast<long>(i) * head_dim_, head_dim_,
                  dst.ptr() + (static_cast<long>(b) * s_ + i) * dim_ + h * head_dim_);
  }

  int dim_ = 0, heads_ = 0, head_dim_ = 0;
  int n_ = 0, s_ = 0;
  Linear<T> q_, k_, v_, o_;
  Tensor<T> q_out_, k_out_, v_out_, probs_;
};

/// Pre-LN transformer block: x + MHA(LN(x)), then x + MLP(LN(x)).
template <class T>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(int dim, int heads, int mlp_mult, Rng& rng) : dim_(dim) {
    ln1_ = LayerNorm<T>(dim);
    ln2_ = LayerNorm<T>(dim);
    attn_ = MultiheadSelfAttention<T>(dim, heads, rng);
    fc1_ = Linear<T>(dim, dim * mlp_mult, rng);
    fc2_ = Linear<T>(dim * mlp_mult, dim, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    auto a = attn_.forward(ln1_.forward(x).reshaped(x.shape));
    Tensor<T> x1(x.shape);
    kern::vadd<T>(static_cast<int>(x.numel()), x.ptr(), a.ptr(), x1.ptr());
    const int rows = x.dim(0) * x.dim(1);
    auto m = fc2_.forward(act_.forward(fc1_.forward(ln2_.forward(x1).reshaped({rows, dim_}))));
    Tensor<T> y(x.shape);
    kern::vadd<T>(static_cast<int>(x.numel()), x1.ptr(), m.ptr(), y.ptr());
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int rows = dy.dim(0) * dy.dim(1);
    auto dm = fc1_.backward(act_.backward(fc2_.backward(dy.reshaped({rows, dim_}))));
    auto dx1 = ln2_.backward(dm.reshaped(dy.shape));
    kern::vadd<T>(static_cast<int>(dy.numel()), dx1.ptr(), dy.ptr(), dx1.ptr());
    auto da = attn_.backward(dx1);
    auto dx = ln1_.backward(da);
    kern::vadd<T>(static_cast<int>(dy.numel()), dx.ptr(), dx1.ptr(), dx.ptr());
    return dx;
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    ln1_.collect_params(prefix + ".ln1", out);
    attn_.collect_params(prefix + ".attn", out);
    ln2_.collect_params(prefix + ".ln2", out);
    fc1_.collect_params(prefix + ".fc1", out);
    fc2_.collect_params(prefix + ".fc2", out);
  }

 private:
  int dim_ = 0;
  LayerNorm<T> ln1_, ln2_;
  MultiheadSelfAttention<T> attn_;
  Linear<T> fc1_, fc2_;
  SiLU<T> act_;
};

}  // namespace fgrf::nn
