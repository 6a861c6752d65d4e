// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Rectified-flow training and ODE sampling, plus the DDPM baseline that
// reuses the same velocity network as a discrete-time noise predictor.
//
// Sign convention: training regresses the straight-path velocity
// (z_T - z_0), so backward integration from t=1 to t=0 uses the update
// z <- z - dt * net(z, t, y); a perfectly fitted field then recovers z_0
// exactly. Sampling starts at z(1) ~ N(0, I).
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgrf/losses.hpp"
#include "fgrf/nets.hpp"
#include "fgrf/optim.hpp"
#include "fgrf/rng.hpp"
#include "fgrf/tensor.hpp"

namespace fgrf::flow {

struct FlowTrainConfig {
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double time_horizon = 1.0;  // fixed; validated
  std::uint64_t seed = 0;
  std::string optimizer = "sgd";

  void validate() const {
    if (epochs < 0) throw std::invalid_argument("flow: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("flow: batch_size must be >= 1");
    if (learning_rate <= 0) throw std::invalid_argument("flow: learning_rate must be > 0");
    if (time_horizon != 1.0) throw std::invalid_argument("flow: time_horizon is fixed to 1.0");
  }
};

struct SamplerConfig {
  int num_steps = 50;
  bool clamp_output = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_steps < 1) throw std::invalid_argument("sampler: num_steps must be >= 1");
  }
};

struct DdpmConfig {
  int num_timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_timesteps < 1) throw std::invalid_argument("ddpm: num_timesteps must be >= 1");
    if (!(0 < beta_start && beta_start < beta_end && beta_end < 1))
      throw std::invalid_argument("ddpm: need 0 < beta_start < beta_end < 1");
  }
};

// ---------------------------------------------------------------------------
// Interpolation and the RFM objective
// ---------------------------------------------------------------------------

/// (1-t) z0 + t zT, the straight path between data and noise.
template <class T>
Tensor<T> interpolate(const Tensor<T>& z0, const Tensor<T>& zT, T t) {
  check_same_shape(z0.shape, zT.shape, "interpolate");
  if (!(t >= T(0) && t <= T(1))) throw std::domain_error("interpolate: t outside [0,1]");
  Tensor<T> out(z0.shape);
  kern::lerp<T>(static_cast<int>(z0.numel()), z0.ptr(), zT.ptr(), t, out.ptr());
  return out;
}

/// Mean squared deviation of the predicted velocity from the straight-path
/// target (z_T - z_0), averaged over every element of the batch. When
/// `accumulate_grads` is set, parameter gradients are accumulated via the
/// net's backward pass.
template <class T>
T rfm_loss(nets::VelocityNet<T>& net, const Tensor<T>& z0, const std::vector<int>& y,
           const std::vector<T>& t, const Tensor<T>& zT, bool accumulate_grads = false) {
  check_same_shape(z0.shape, zT.shape, "rfm_loss");
  if (z0.dim(0) != static_cast<int>(y.size()) || y.size() != t.size())
    throw std::invalid_argument("rfm_loss: batch size mismatch");
  for (T ti : t)
    if (!(ti >= T(0) && ti <= T(1))) throw std::domain_error("rfm_loss: t outside [0,1]");

  Tensor<T> zt(z0.shape);
  const long per = z0.numel() / z0.dim(0);
  for (int i = 0; i < z0.dim(0); ++i)
    kern::lerp<T>(static_cast<int>(per), z0.ptr() + i * per, zT.ptr() + i * per,
                  t[static_cast<std::size_t>(i)], zt.ptr() + i * per);

  auto v = net.forward(zt, t, y);
  Tensor<T> target(z0.shape);
  kern::vsub<T>(static_cast<int>(z0.numel()), zT.ptr(), z0.ptr(), target.ptr());
  auto l = nn::mse(v, target);
  if (accumulate_grads) net.backward(l.grad);
  return l.value;
}

// ---------------------------------------------------------------------------
// Euler sampling of the backward ODE
// ---------------------------------------------------------------------------

/// Integrates z' = v backward from t=1 to t=0 in `num_steps` uniform Euler
/// steps, starting at per-sample standard-normal draws derived from
/// cfg.seed. Batched version; sample i uses the noise stream
/// derive_seed(cfg.seed, "sample", i), so results are independent of how a
/// workload is batched.
template <class T>
Tensor<T> sample_features_batch(nets::VelocityNet<T>& net, const std::vector<int>& labels,
                                const SamplerConfig& cfg,
                                std::vector<Tensor<T>>* trajectory = nullptr) {
  cfg.validate();
  const auto shape = net.feature_shape();
  const int n = static_cast<int>(labels.size());
  Tensor<T> z({n, shape[0], shape[1], shape[2]});
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, "sample", i));
    const long per = z.numel() / n;
    T* p = z.ptr() + i * per;
    for (long j = 0; j < per; ++j) p[j] = static_cast<T>(rng.normal());
  }
  if (trajectory) trajectory->push_back(z);
  const T dt = T(1) / static_cast<T>(cfg.num_steps);
  std::vector<T> t(static_cast<std::size_t>(n));
  for (int s = 0; s < cfg.num_steps; ++s) {
    const T ts = T(1) - static_cast<T>(s) * dt;
    std::fill(t.begin(), t.end(), ts);
    auto v = net.forward(z, t, labels);
    kern::axpy<T>(static_cast<int>(z.numel()), -dt, v.ptr(), z.ptr());
    if (trajectory) trajectory->push_back(z);
  }
  if (cfg.clamp_output)
    for (auto& x : z.data) x = x < T(-1) ? T(-1) : (x > T(1) ? T(1) : x);
  return z;
}

/// Single-sample convenience wrapper; returns a [C,H,W] feature tensor.
template <class T>
Tensor<T> sample_features(nets::VelocityNet<T>& net, int label, const SamplerConfig& cfg,
                          std::vector<Tensor<T>>* trajectory = nullptr) {
  auto batch = sample_features_batch(net, std::vector<int>{label}, cfg, trajectory);
  return batch.reshaped(net.feature_shape());
}

// ---------------------------------------------------------------------------
// DDPM baseline
// ---------------------------------------------------------------------------

template <class T>
struct DdpmSchedule {
  std::vector<T> betas, alphas, alpha_bars;

  explicit DdpmSchedule(const DdpmConfig& cfg) {
    cfg.validate();
    const int n = cfg.num_timesteps;
    betas.resize(static_cast<std::size_t>(n));
    alphas.resize(static_cast<std::size_t>(n));
    alpha_bars.resize(static_cast<std::size_t>(n));
    double bar = 1.0;
    for (int k = 0; k < n; ++k) {
      const double b = n == 1 ? cfg.beta_start
                              : cfg.beta_start + (cfg.beta_end - cfg.beta_start) * k / (n - 1);
      betas[static_cast<std::size_t>(k)] = static_cast<T>(b);
      alphas[static_cast<std::size_t>(k)] = static_cast<T>(1.0 - b);
      bar *= (1.0 - b);
      alpha_bars[static_cast<std::size_t>(k)] = static_cast<T>(bar);
    }
  }

  /// Discrete step k is fed to the shared velocity net as t = (k+1)/N.
  T embed_time(int k) const {
    return static_cast<T>(k + 1) / static_cast<T>(alpha_bars.size());
  }
};

/// Epsilon-prediction objective on one batch: sample a timestep and noise per
/// element, return mean ||net(noised, t, y) - eps||^2.
template <class T>
T ddpm_train_step(nets::VelocityNet<T>& net, const Tensor<T>& z0, const std::vector<int>& y,
                  const DdpmSchedule<T>& sched, Rng& rng, bool accumulate_grads = false) {
  const int n = z0.dim(0);
  if (n != static_cast<int>(y.size())) throw std::invalid_argument("ddpm: batch size mismatch");
  const long per = z0.numel() / n;
  Tensor<T> zt(z0.shape), eps(z0.shape);
  std::vector<T> t(static_cast<std::size_t>(n));
  const int nt = static_cast<int>(sched.betas.size());
  for (int i = 0; i < n; ++i) {
    const int k = static_cast<int>(rng.below(static_cast<std::uint64_t>(nt)));
    const T ab = sched.alpha_bars[static_cast<std::size_t>(k)];
    const T sa = static_cast<T>(std::sqrt(static_cast<double>(ab)));
    const T sn = static_cast<T>(std::sqrt(1.0 - static_cast<double>(ab)));
    t[static_cast<std::size_t>(i)] = sched.embed_time(k);
    T* e = eps.ptr() + i * per;
    T* z = zt.ptr() + i * per;
    const T* x = z0.ptr() + i * per;
    for (long j = 0; j < per; ++j) {
      e[j] = static_cast<T>(rng.normal());
      z[j] = sa * x[j] + sn * e[j];
    }
  }
  auto pred = net.forward(zt, t, y);
  auto l = nn::mse(pred, eps);
  if (accumulate_grads) net.backward(l.grad);
  return l.value;
}

/// Ancestral sampling over the full timestep ladder; deterministic given
/// cfg.seed (per-sample noise streams, as in sample_features_batch).
template <class T>
Tensor<T> ddpm_sample_batch(nets::VelocityNet<T>& net, const std::vector<int>& labels,
                            const DdpmConfig& cfg, bool clamp_output = true) {
  cfg.validate();
  const DdpmSchedule<T> sched(cfg);
  const auto shape = net.feature_shape();
  const int n = static_cast<int>(labels.size());
  const int nt = cfg.num_timesteps;
  Tensor<T> z({n, shape[0], shape[1], shape[2]});
  const long per = z.numel() / n;
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    streams.emplace_back(derive_seed(cfg.seed, "sample", i));
    T* p = z.ptr() + i * per;
    for (long j = 0; j < per; ++j) p[j] = static_cast<T>(streams.back().normal());
  }
  std::vector<T> t(static_cast<std::size_t>(n));
  for (int k = nt - 1; k >= 0; --k) {
    std::fill(t.begin(), t.end(), sched.embed_time(k));
    auto pred = net.forward(z, t, labels);
    const double a = static_cast<double>(sched.alphas[static_cast<std::size_t>(k)]);
    const double ab = static_cast<double>(sched.alpha_bars[static_cast<std::size_t>(k)]);
    const double ab_prev = k > 0 ? static_cast<double>(sched.alpha_bars[static_cast<std::size_t>(k - 1)]) : 1.0;
    const double beta = static_cast<double>(sched.betas[static_cast<std::size_t>(k)]);
    const T inv_sqrt_a = static_cast<T>(1.0 / std::sqrt(a));
    const T eps_coef = static_cast<T>((1.0 - a) / std::sqrt(1.0 - ab));
    const T sigma = static_cast<T>(k > 0 ? std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta) : 0.0);
    for (int i = 0; i < n; ++i) {
      T* zp = z.ptr() + i * per;
      const T* ep = pred.ptr() + i * per;
      for (long j = 0; j < per; ++j) {
        T val = inv_sqrt_a * (zp[j] - eps_coef * ep[j]);
        if (k > 0) val += sigma * static_cast<T>(streams[static_cast<std::size_t>(i)].normal());
        zp[j] = val;
      }
    }
  }
  if (clamp_output)
    for (auto& x : z.data) x = x < T(-1) ? T(-1) : (x > T(1) ? T(1) : x);
  return z;
}

template <class T>
Tensor<T> ddpm_sample(nets::VelocityNet<T>& net, int label, const DdpmConfig& cfg,
                      bool clamp_output = true) {
  auto batch = ddpm_sample_batch(net, std::vector<int>{label}, cfg, clamp_output);
  return batch.reshaped(net.feature_shape());
}

// ---------------------------------------------------------------------------
// Generic training loops (clients wrap these with their data handling)
// ---------------------------------------------------------------------------

struct TrainCurve {
  std::vector<double> epoch_losses;
};

/// RFM training: fresh noise z_T and fresh t ~ U[0,1] per sample per epoch.
template <class T>
TrainCurve train_rfm(nets::VelocityNet<T>& net, const Tensor<T>& features,
                     const std::vector<int>& labels, const FlowTrainConfig& cfg) {
  cfg.validate();
  if (features.dim(0) == 0) throw std::invalid_argument("train_rfm: empty feature set");
  const int n = features.dim(0);
  const long per = features.numel() / n;
  nn::Optimizer<T> opt(net.params(), nn::optimizer_from_string(cfg.optimizer),
                       static_cast<T>(cfg.learning_rate));
  Rng order_rng(derive_seed(cfg.seed, "order"));
  Rng noise_rng(derive_seed(cfg.seed, "noise"));
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  TrainCurve curve;
  for (int e = 0; e < cfg.epochs; ++e) {
    order_rng.shuffle(idx);
    double epoch_loss = 0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      Tensor<T> z0({bs, features.dim(1), features.dim(2), features.dim(3)});
      Tensor<T> zT(z0.shape);
      std::vector<int> y(static_cast<std::size_t>(bs));
      std::vector<T> t(static_cast<std::size_t>(bs));
      for (int b = 0; b < bs; ++b) {
        const int src = idx[static_cast<std::size_t>(start + b)];
        std::copy_n(features.ptr() + src * per, per, z0.ptr() + b * per);
        y[static_cast<std::size_t>(b)] = labels[static_cast<std::size_t>(src)];
        t[static_cast<std::size_t>(b)] = static_cast<T>(noise_rng.uniform());
        T* zp = zT.ptr() + b * per;
        for (long j = 0; j < per; ++j) zp[j] = static_cast<T>(noise_rng.normal());
      }
      epoch_loss += static_cast<double>(rfm_loss(net, z0, y, t, zT, true));
      ++batches;
      opt.step();
    }
    curve.epoch_losses.push_back(batches ? epoch_loss / batches : 0.0);
  }
  return curve;
}

/// DDPM training with the same loop structure.
template <class T>
TrainCurve train_ddpm(nets::VelocityNet<T>& net, const Tensor<T>& features,
                      const std::vector<int>& labels, const FlowTrainConfig& cfg,
                      const DdpmConfig& dcfg) {
  cfg.validate();
  if (features.dim(0) == 0) throw std::invalid_argument("train_ddpm: empty feature set");
  const DdpmSchedule<T> sched(dcfg);
  const int n = features.dim(0);
  const long per = features.numel() / n;
  nn::Optimizer<T> opt(net.params(), nn::optimizer_from_string(cfg.optimizer),
                       static_cast<T>(cfg.learning_rate));
  Rng order_rng(derive_seed(cfg.seed, "order"));
  Rng noise_rng(derive_seed(cfg.seed, "noise"));
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  TrainCurve curve;
  for (int e = 0; e < cfg.epochs; ++e) {
    order_rng.shuffle(idx);
    double epoch_loss = 0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      Tensor<T> z0({bs, features.dim(1), features.dim(2), features.dim(3)});
      std::vector<int> y(static_cast<std::size_t>(bs));
      for (int b = 0; b < bs; ++b) {
        const int src = idx[static_cast<std::size_t>(start + b)];
        std::copy_n(features.ptr() + src * per, per, z0.ptr() + b * per);
        y[static_cast<std::size_t>(b)] = labels[static_cast<std::size_t>(src)];
      }
      epoch_loss += static_cast<double>(ddpm_train_step(net, z0, y, sched, noise_rng, true));
      ++batches;
      opt.step();
    }
    curve.epoch_losses.push_back(batches ? epoch_loss / batches : 0.0);
  }
  return curve;
}

}  // namespace fgrf::flow
