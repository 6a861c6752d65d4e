// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Hand-rolled layers with explicit forward/backward passes. Everything is
// templated on the scalar type: float for training, double for the
// finite-difference gradient oracles in the test suite. The arithmetic
// bottoms out in fgrf::kern, which dispatches to scalar or AVX2 variants.
#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgrf/kernels.hpp"
#include "fgrf/rng.hpp"
#include "fgrf/tensor.hpp"

namespace fgrf::nn {

template <class T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;
};

template <class T>
using ParamList = std::vector<ParamRef<T>>;

template <class T>
long param_count(const ParamList<T>& ps) {
  long n = 0;
  for (const auto& p : ps) n += p.value->numel();
  return n;
}

template <class T>
void zero_grads(const ParamList<T>& ps) {
  for (const auto& p : ps) p.grad->zero();
}

/// Xavier-uniform init, the default for every weight matrix/kernel here.
template <class T>
void xavier_init(Tensor<T>& w, long fan_in, long fan_out, Rng& rng) {
  const double b = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : w.data) x = static_cast<T>(rng.uniform(-b, b));
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

struct ConvGeom {
  int channels, in_h, in_w;
  int kernel, stride, pad;
  int out_h, out_w;

  ConvGeom() = default;
  ConvGeom(int c, int ih, int iw, int k, int s, int p)
      : channels(c), in_h(ih), in_w(iw), kernel(k), stride(s), pad(p) {
    out_h = (ih + 2 * p - k) / s + 1;
    out_w = (iw + 2 * p - k) / s + 1;
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("conv: kernel larger than input");
  }
  long col_rows() const { return static_cast<long>(channels) * kernel * kernel; }
  long col_cols() const { return static_cast<long>(out_h) * out_w; }
};

template <class T>
void im2col(const T* img, const ConvGeom& g, T* col) {
  const int k = g.kernel;
  const long ccols = g.col_cols();
  for (int c = 0; c < g.channels; ++c) {
    for (int u = 0; u < k; ++u) {
      for (int v = 0; v < k; ++v) {
        T* dst = col + (static_cast<long>(c) * k * k + u * k + v) * ccols;
        for (int i = 0; i < g.out_h; ++i) {
          const int y = i * g.stride - g.pad + u;
          for (int j = 0; j < g.out_w; ++j) {
            const int x = j * g.stride - g.pad + v;
            dst[static_cast<long>(i) * g.out_w + j] =
                (y >= 0 && y < g.in_h && x >= 0 && x < g.in_w)
                    ? img[(static_cast<long>(c) * g.in_h + y) * g.in_w + x]
                    : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, const ConvGeom& g, T* img /* accumulated into */) {
  const int k = g.kernel;
  const long ccols = g.col_cols();
  for (int c = 0; c < g.channels; ++c) {
    for (int u = 0; u < k; ++u) {
      for (int v = 0; v < k; ++v) {
        const T* src = col + (static_cast<long>(c) * k * k + u * k + v) * ccols;
        for (int i = 0; i < g.out_h; ++i) {
          const int y = i * g.stride - g.pad + u;
          if (y < 0 || y >= g.in_h) continue;
          for (int j = 0; j < g.out_w; ++j) {
            const int x = j * g.stride - g.pad + v;
            if (x < 0 || x >= g.in_w) continue;
            img[(static_cast<long>(c) * g.in_h + y) * g.in_w + x] +=
                src[static_cast<long>(i) * g.out_w + j];
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
    weight_ = Tensor<T>({out_ch, in_ch, kernel, kernel});
    bias_ = Tensor<T>({out_ch});
    wgrad_ = Tensor<T>::zeros_like(weight_);
    bgrad_ = Tensor<T>::zeros_like(bias_);
    xavier_init(weight_, static_cast<long>(in_ch) * kernel * kernel,
                static_cast<long>(out_ch) * kernel * kernel, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.dim(1) != in_ch_) throw std::invalid_argument("conv2d: channel mismatch");
    const int n = x.dim(0);
    geom_ = ConvGeom(in_ch_, x.dim(2), x.dim(3), kernel_, stride_, pad_);
    in_shape_ = x.shape;
    const long crows = geom_.col_rows(), ccols = geom_.col_cols();
    cols_.assign(static_cast<std::size_t>(n) * crows * ccols, T(0));
    Tensor<T> y({n, out_ch_, geom_.out_h, geom_.out_w});
    const long xs = x.numel() / n, ys = y.numel() / n;
    for (int s = 0; s < n; ++s) {
      T* col = cols_.data() + static_cast<std::size_t>(s) * crows * ccols;
      im2col(x.ptr() + s * xs, geom_, col);
      kern::gemm_nn<T>(weight_.ptr(), col, y.ptr() + s * ys, out_ch_, static_cast<int>(ccols),
                       static_cast<int>(crows), false);
      for (int oc = 0; oc < out_ch_; ++oc) {
        T* row = y.ptr() + s * ys + oc * ccols;
        const T b = bias_[oc];
        for (long i = 0; i < ccols; ++i) row[i] += b;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int n = dy.dim(0);
    const long crows = geom_.col_rows(), ccols = geom_.col_cols();
    Tensor<T> dx(in_shape_);
    std::vector<T> dcol(static_cast<std::size_t>(crows) * ccols);
    const long dys = dy.numel() / n, dxs = dx.numel() / n;
    for (int s = 0; s < n; ++s) {
      const T* dyp = dy.ptr() + s * dys;
      const T* col = cols_.data() + static_cast<std::size_t>(s) * crows * ccols;
      kern::gemm_nt<T>(dyp, col, wgrad_.ptr(), out_ch_, static_cast<int>(crows),
                       static_cast<int>(ccols), true);
      for (int oc = 0; oc < out_ch_; ++oc)
        bgrad_[oc] += kern::sum<T>(static_cast<int>(ccols), dyp + oc * ccols);
      kern::gemm_tn<T>(weight_.ptr(), dyp, dcol.data(), static_cast<int>(crows),
                       static_cast<int>(ccols), out_ch_, false);
      col2im(dcol.data(), geom_, dx.ptr() + s * dxs);
    }
    return dx;
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
  }

  void drop_cache() { cols_.clear(); }
  int out_channels() const { return out_ch_; }
  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0;
  Tensor<T> weight_, bias_, wgrad_, bgrad_;
  std::vector<int> in_shape_;
  std::vector<T> cols_;
  ConvGeom geom_;
};

// ---------------------------------------------------------------------------
// ConvTranspose2d (stride-s transposed convolution; weight is [IC, OC, k, k])
// ---------------------------------------------------------------------------

template <class T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad) {
    weight_ = Tensor<T>({in_ch, out_ch, kernel, kernel});
    bias_ = Tensor<T>({out_ch});
    wgrad_ = Tensor<T>::zeros_like(weight_);
    bgrad_ = Tensor<T>::zeros_like(bias_);
    xavier_init(weight_, static_cast<long>(in_ch) * kernel * kernel,
                static_cast<long>(out_ch) * kernel * kernel, rng);
  }

  // y[s] = col2im(W^T x[s]); the "col geometry" lives on the output side,
  // mirroring the data-backward pass of the underlying convolution y -> x.
  Tensor<T> forward(const Tensor<T>& x) {
    if (x.dim(1) != in_ch_) throw std::invalid_argument("conv_transpose2d: channel mismatch");
    const int n = x.dim(0);
    const int oh = (x.dim(2) - 1) * stride_ - 2 * pad_ + kernel_;
    const int ow = (x.dim(3) - 1) * stride_ - 2 * pad_ + kernel_;
    geom_ = ConvGeom(out_ch_, oh, ow, kernel_, stride_, pad_);
    if (geom_.out_h != x.dim(2) || geom_.out_w != x.dim(3))
      throw std::invalid_argument("conv_transpose2d: inconsistent geometry");
    x_ = x;
    const long crows = geom_.col_rows(), ccols = geom_.col_cols();
    Tensor<T> y({n, out_ch_, oh, ow});
    std::vector<T> col(static_cast<std::size_t>(crows) * ccols);
    const long xs = x.numel() / n, ys = y.numel() / n;
    const long ohw = static_cast<long>(oh) * ow;
    for (int s = 0; s < n; ++s) {
      kern::gemm_tn<T>(weight_.ptr(), x.ptr() + s * xs, col.data(), static_cast<int>(crows),
                       static_cast<int>(ccols), in_ch_, false);
      col2im(col.data(), geom_, y.ptr() + s * ys);
      for (int oc = 0; oc < out_ch_; ++oc) {
        T* row = y.ptr() + s * ys + oc * ohw;
        const T b = bias_[oc];
        for (long i = 0; i < ohw; ++i) row[i] += b;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int n = dy.dim(0);
    const long crows = geom_.col_rows(), ccols = geom_.col_cols();
    Tensor<T> dx(x_.shape);
    std::vector<T> dcol(static_cast<std::size_t>(crows) * ccols);
    const long dys = dy.numel() / n, dxs = dx.numel() / n;
    const long ohw = static_cast<long>(geom_.in_h) * geom_.in_w;
    for (int s = 0; s < n; ++s) {
      const T* dyp = dy.ptr() + s * dys;
      im2col(dyp, geom_, dcol.data());
      kern::gemm_nn<T>(weight_.ptr(), dcol.data(), dx.ptr() + s * dxs, in_ch_,
                       static_cast<int>(ccols), static_cast<int>(crows), false);
      kern::gemm_nt<T>(x_.ptr() + s * dxs, dcol.data(), wgrad_.ptr(), in_ch_,
                       static_cast<int>(crows), static_cast<int>(ccols), true);
      for (int oc = 0; oc < out_ch_; ++oc)
        bgrad_[oc] += kern::sum<T>(static_cast<int>(ohw), dyp + oc * ohw);
    }
    return dx;
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
  }

 private:
  int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0;
  Tensor<T> weight_, bias_, wgrad_, bgrad_;
  Tensor<T> x_;
  ConvGeom geom_;
};

// ---------------------------------------------------------------------------
// Linear (weight is [out, in]; y = x W^T + b)
// ---------------------------------------------------------------------------

template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, Rng& rng) : in_(in), out_(out) {
    weight_ = Tensor<T>({out, in});
    bias_ = Tensor<T>({out});
    wgrad_ = Tensor<T>::zeros_like(weight_);
    bgrad_ = Tensor<T>::zeros_like(bias_);
    xavier_init(weight_, in, out, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.dim(1) != in_) throw std::invalid_argument("linear: input width mismatch");
    const int n = x.dim(0);
    x_ = x;
    Tensor<T> y({n, out_});
    kern::gemm_nt<T>(x.ptr(), weight_.ptr(), y.ptr(), n, out_, in_, false);
    for (int s = 0; s < n; ++s)
      kern::axpy<T>(out_, T(1), bias_.ptr(), y.ptr() + static_cast<long>(s) * out_);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int n = dy.dim(0);
    Tensor<T> dx({n, in_});
    kern::gemm_nn<T>(dy.ptr(), weight_.ptr(), dx.ptr(), n, in_, out_, false);
    kern::gemm_tn<T>(dy.ptr(), x_.ptr(), wgrad_.ptr(), out_, in_, n, true);
    for (int s = 0; s < n; ++s)
      kern::axpy<T>(out_, T(1), dy.ptr() + static_cast<long>(s) * out_, bgrad_.ptr());
    return dx;
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
  }

  Tensor<T>& weight() { return weight_; }
  Tensor<T>& bias() { return bias_; }
  int out_features() const { return out_; }

 private:
  int in_ = 0, out_ = 0;
  Tensor<T> weight_, bias_, wgrad_, bgrad_;
  Tensor<T> x_;
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <class T>
class ReLU {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    Tensor<T> y(x.shape);
    kern::relu_fwd<T>(static_cast<int>(x.numel()), x.ptr(), y.ptr());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape);
    kern::relu_bwd<T>(static_cast<int>(dy.numel()), x_.ptr(), dy.ptr(), dx.ptr());
    return dx;
  }

 private:
  Tensor<T> x_;
};

template <class T>
class Tanh {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    y_ = Tensor<T>(x.shape);
    kern::vtanh<T>(static_cast<int>(x.numel()), x.ptr(), y_.ptr());
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape);
    for (long i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * (T(1) - y_[i] * y_[i]);
    return dx;
  }

 private:
  Tensor<T> y_;
};

template <class T>
class Sigmoid {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    y_ = Tensor<T>(x.shape);
    kern::vsigmoid<T>(static_cast<int>(x.numel()), x.ptr(), y_.ptr());
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape);
    for (long i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * y_[i] * (T(1) - y_[i]);
    return dx;
  }

 private:
  Tensor<T> y_;
};

template <class T>
class SiLU {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    x_ = x;
    sig_ = Tensor<T>(x.shape);
    kern::vsigmoid<T>(static_cast<int>(x.numel()), x.ptr(), sig_.ptr());
    Tensor<T> y(x.shape);
    kern::vmul<T>(static_cast<int>(x.numel()), x.ptr(), sig_.ptr(), y.ptr());
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.shape);
    for (long i = 0; i < dy.numel(); ++i) {
      const T s = sig_[i];
      dx[i] = dy[i] * (s + x_[i] * s * (T(1) - s));
    }
    return dx;
  }

 private:
  Tensor<T> x_, sig_;
};

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

template <class T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels, T momentum = T(0.1), T eps = T(1e-5))
      : ch_(channels), momentum_(momentum), eps_(eps) {
    gamma_ = Tensor<T>({channels});
    beta_ = Tensor<T>({channels});
    gamma_.fill(T(1));
    ggrad_ = Tensor<T>::zeros_like(gamma_);
    bgrad_ = Tensor<T>::zeros_like(beta_);
    running_mean_ = Tensor<T>({channels});
    running_var_ = Tensor<T>({channels});
    running_var_.fill(T(1));
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c != ch_) throw std::invalid_argument("batchnorm2d: channel mismatch");
    const long hw = static_cast<long>(h) * w;
    const long m = static_cast<long>(n) * hw;
    Tensor<T> y(x.shape);
    if (train) {
      xhat_ = Tensor<T>(x.shape);
      invstd_ = Tensor<T>({c});
      m_ = m;
      for (int j = 0; j < c; ++j) {
        double mean = 0;
        for (int s = 0; s < n; ++s)
          mean += kern::sum<T>(static_cast<int>(hw),
                               x.ptr() + (static_cast<long>(s) * c + j) * hw);
        mean /= static_cast<double>(m);
        double var = 0;
        for (int s = 0; s < n; ++s) {
          const T* p = x.ptr() + (static_cast<long>(s) * c + j) * hw;
          for (long i = 0; i < hw; ++i) {
            const double d = static_cast<double>(p[i]) - mean;
            var += d * d;
          }
        }
        var /= static_cast<double>(m);
        const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
        invstd_[j] = istd;
        running_mean_[j] = (T(1) - momentum_) * running_mean_[j] + momentum_ * static_cast<T>(mean);
        running_var_[j] = (T(1) - momentum_) * running_var_[j] + momentum_ * static_cast<T>(var);
        for (int s = 0; s < n; ++s) {
          const T* p = x.ptr() + (static_cast<long>(s) * c + j) * hw;
          T* xh = xhat_.ptr() + (static_cast<long>(s) * c + j) * hw;
          T* yo = y.ptr() + (static_cast<long>(s) * c + j) * hw;
          for (long i = 0; i < hw; ++i) {
            xh[i] = (p[i] - static_cast<T>(mean)) * istd;
            yo[i] = gamma_[j] * xh[i] + beta_[j];
          }
        }
      }
    } else {
      for (int j = 0; j < c; ++j) {
        const T istd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[j]) +
                                                      static_cast<double>(eps_)));
        for (int s = 0; s < n; ++s) {
          const T* p = x.ptr() + (static_cast<long>(s) * c + j) * hw;
          T* yo = y.ptr() + (static_cast<long>(s) * c + j) * hw;
          for (long i = 0; i < hw; ++i)
            yo[i] = gamma_[j] * (p[i] - running_mean_[j]) * istd + beta_[j];
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int n = dy.dim(0), c = dy.dim(1), h = dy.dim(2), w = dy.dim(3);
    const long hw = static_cast<long>(h) * w;
    Tensor<T> dx(dy.shape);
    for (int j = 0; j < c; ++j) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int s = 0; s < n; ++s) {
        const T* dp = dy.ptr() + (static_cast<long>(s) * c + j) * hw;
        const T* xh = xhat_.ptr() + (static_cast<long>(s) * c + j) * hw;
        for (long i = 0; i < hw; ++i) {
          sum_dy += static_cast<double>(dp[i]);
          sum_dy_xhat += static_cast<double>(dp[i]) * static_cast<double>(xh[i]);
        }
      }
      ggrad_[j] += static_cast<T>(sum_dy_xhat);
      bgrad_[j] += static_cast<T>(sum_dy);
      const double g = static_cast<double>(gamma_[j]);
      const double istd = static_cast<double>(invstd_[j]);
      const double inv_m = 1.0 / static_cast<double>(m_);
      for (int s = 0; s < n; ++s) {
        const T* dp = dy.ptr() + (static_cast<long>(s) * c + j) * hw;
        const T* xh = xhat_.ptr() + (static_cast<long>(s) * c + j) * hw;
        T* dxp = dx.ptr() + (static_cast<long>(s) * c + j) * hw;
        for (long i = 0; i < hw; ++i) {
          const double t = static_cast<double>(m_) * static_cast<double>(dp[i]) - sum_dy -
                           static_cast<double>(xh[i]) * sum_dy_xhat;
          dxp[i] = static_cast<T>(g * istd * inv_m * t);
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggrad_});
    out.push_back({prefix + ".beta", &beta_, &bgrad_});
  }

  // running stats are buffers, not parameters; checkpoints carry them anyway
  void collect_buffers(const std::string& prefix, std::vector<std::pair<std::string, Tensor<T>*>>& out) {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
  }

 private:
  int ch_ = 0;
  T momentum_ = T(0.1), eps_ = T(1e-5);
  Tensor<T> gamma_, beta_, ggrad_, bgrad_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_, invstd_;
  long m_ = 0;
};

// ---------------------------------------------------------------------------
// LayerNorm over the last dimension of [rows, dim]
// ---------------------------------------------------------------------------

template <class T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int dim, T eps = T(1e-5)) : dim_(dim), eps_(eps) {
    gamma_ = Tensor<T>({dim});
    beta_ = Tensor<T>({dim});
    gamma_.fill(T(1));
    ggrad_ = Tensor<T>::zeros_like(gamma_);
    bgrad_ = Tensor<T>::zeros_like(beta_);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const long rows = x.numel() / dim_;
    shape_ = x.shape;
    xhat_ = Tensor<T>({static_cast<int>(rows), dim_});
    invstd_.assign(static_cast<std::size_t>(rows), T(0));
    Tensor<T> y(x.shape);
    for (long r = 0; r < rows; ++r) {
      const T* p = x.ptr() + r * dim_;
      T* xh = xhat_.ptr() + r * dim_;
      T* yo = y.ptr() + r * dim_;
      double mean = 0;
      for (int i = 0; i < dim_; ++i) mean += static_cast<double>(p[i]);
      mean /= dim_;
      double var = 0;
      for (int i = 0; i < dim_; ++i) {
        const double d = static_cast<double>(p[i]) - mean;
        var += d * d;
      }
      var /= dim_;
      const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
      invstd_[static_cast<std::size_t>(r)] = istd;
      for (int i = 0; i < dim_; ++i) {
        xh[i] = (p[i] - static_cast<T>(mean)) * istd;
        yo[i] = gamma_[i] * xh[i] + beta_[i];
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const long rows = dy.numel() / dim_;
    Tensor<T> dx(shape_);
    for (long r = 0; r < rows; ++r) {
      const T* dp = dy.ptr() + r * dim_;
      const T* xh = xhat_.ptr() + r * dim_;
      T* dxp = dx.ptr() + r * dim_;
      double sum_dxhat = 0, sum_dxhat_xhat = 0;
      for (int i = 0; i < dim_; ++i) {
        const double dxh = static_cast<double>(dp[i]) * static_cast<double>(gamma_[i]);
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * static_cast<double>(xh[i]);
        ggrad_[i] += dp[i] * xh[i];
        bgrad_[i] += dp[i];
      }
      const double istd = static_cast<double>(invstd_[static_cast<std::size_t>(r)]);
      for (int i = 0; i < dim_; ++i) {
        const double dxh = static_cast<double>(dp[i]) * static_cast<double>(gamma_[i]);
        dxp[i] = static_cast<T>(istd / dim_ *
                                (dim_ * dxh - sum_dxhat -
                                 static_cast<double>(xh[i]) * sum_dxhat_xhat));
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggrad_});
    out.push_back({prefix + ".beta", &beta_, &bgrad_});
  }

 private:
  int dim_ = 0;
  T eps_ = T(1e-5);
  Tensor<T> gamma_, beta_, ggrad_, bgrad_;
  Tensor<T> xhat_;
  std::vector<T> invstd_;
  std::vector<int> shape_;
};

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

template <class T>
class Embedding {
 public:
  Embedding() = default;
  Embedding(int count, int dim, Rng& rng) : count_(count), dim_(dim) {
    table_ = Tensor<T>({count, dim});
    tgrad_ = Tensor<T>::zeros_like(table_);
    for (auto& x : table_.data) x = static_cast<T>(rng.normal() * 0.02);
  }

  Tensor<T> forward(const std::vector<int>& idx) {
    idx_ = idx;
    Tensor<T> y({static_cast<int>(idx.size()), dim_});
    for (std::size_t s = 0; s < idx.size(); ++s) {
      if (idx[s] < 0 || idx[s] >= count_) throw std::out_of_range("embedding: index out of range");
      std::copy_n(table_.ptr() + static_cast<long>(idx[s]) * dim_, dim_,
                  y.ptr() + static_cast<long>(s) * dim_);
    }
    return y;
  }

  void backward(const Tensor<T>& dy) {
    for (std::size_t s = 0; s < idx_.size(); ++s)
      kern::axpy<T>(dim_, T(1), dy.ptr() + static_cast<long>(s) * dim_,
                    tgrad_.ptr() + static_cast<long>(idx_[s]) * dim_);
  }

  void collect_params(const std::string& prefix, ParamList<T>& out) {
    out.push_back({prefix + ".table", &table_, &tgrad_});
  }

 private:
  int count_ = 0, dim_ = 0;
  Tensor<T> table_, tgrad_;
  std::vector<int> idx_;
};

// ---------------------------------------------------------------------------
// Global average pool [N,C,H,W] -> [N,C]
// ---------------------------------------------------------------------------

template <class T>
class GlobalAvgPool {
 public:
  Tensor<T> forward(const Tensor<T>& x) {
    shape_ = x.shape;
    const int n = x.dim(0), c = x.dim(1);
    const long hw = static_cast<long>(x.dim(2)) * x.dim(3);
    Tensor<T> y({n, c});
    for (int s = 0; s < n; ++s)
      for (int j = 0; j < c; ++j)
        y.at2(s, j) = kern::sum<T>(static_cast<int>(hw),
                                   x.ptr() + (static_cast<long>(s) * c + j) * hw) /
                      static_cast<T>(hw);
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dx(shape_);
    const int n = shape_[0], c = shape_[1];
    const long hw = static_cast<long>(shape_[2]) * shape_[3];
    for (int s = 0; s < n; ++s)
      for (int j = 0; j < c; ++j) {
        const T g = dy.at2(s, j) / static_cast<T>(hw);
        T* p = dx.ptr() + (static_cast<long>(s) * c + j) * hw;
        for (long i = 0; i < hw; ++i) p[i] = g;
      }
    return dx;
  }

 private:
  std::vector<int> shape_;
};

// ---------------------------------------------------------------------------
// Row-wise softmax helper (returns probabilities; stable)
// ---------------------------------------------------------------------------

template <class T>
void softmax_rows(const T* logits, T* probs, int rows, int cols) {
  std::vector<T> tmp(static_cast<std::size_t>(cols));
  for (int r = 0; r < rows; ++r) {
    const T* in = logits + static_cast<long>(r) * cols;
    T* out = probs + static_cast<long>(r) * cols;
    const T m = kern::max<T>(cols, in);
    for (int i = 0; i < cols; ++i) tmp[static_cast<std::size_t>(i)] = in[i] - m;
    kern::vexp<T>(cols, tmp.data(), out);
    const T z = kern::sum<T>(cols, out);
    kern::scal<T>(cols, T(1) / z, out);
  }
}

}  // namespace fgrf::nn
