// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fgrf/flow.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace fgrf;
using testing::CallbackVelocityNet;

TEST_CASE("interpolate endpoint identities and direct values") {
  Tensor<double> z0({1, 1, 1, 2}, {1.0, -1.0});
  Tensor<double> zT({1, 1, 1, 2}, {0.0, 0.0});

  auto a = flow::interpolate(z0, zT, 0.0);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == -1.0);
  auto b = flow::interpolate(z0, zT, 1.0);
  CHECK(b[0] == 0.0);
  CHECK(b[1] == 0.0);

  auto c = flow::interpolate(z0, zT, 0.25);
  CHECK(c[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(-0.75).epsilon(1e-12));

  // degenerate path: z0 == zT stays put for every t
  for (double t : {0.0, 0.3, 0.77, 1.0}) {
    auto d = flow::interpolate(z0, z0, t);
    CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(-1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(flow::interpolate(z0, zT, -0.1), std::domain_error);
  CHECK_THROWS_AS(flow::interpolate(z0, zT, 1.1), std::domain_error);
  Tensor<double> bad({1, 1, 1, 3});
  CHECK_THROWS_AS(flow::interpolate(z0, bad, 0.5), std::invalid_argument);
}

TEST_CASE("rfm_loss: perfect regressor gives zero, zero net gives mean(v^2)") {
  Rng rng(5);
  Tensor<double> z0({2, 1, 2, 2});
  Tensor<double> zT({2, 1, 2, 2});
  for (auto& v : zT.data) v = rng.normal();
  std::vector<int> y = {0, 1};
  std::vector<double> t = {0.2, 0.9};

  // oracle net returning exactly z_T - z_0
  Tensor<double> target(z0.shape);
  kern::vsub<double>(static_cast<int>(z0.numel()), zT.ptr(), z0.ptr(), target.ptr());
  CallbackVelocityNet<double> oracle({1, 2, 2}, 2, [&](auto&, auto&, auto&) { return target; });
  CHECK(flow::rfm_loss(oracle, z0, y, t, zT) == doctest::Approx(0.0).epsilon(1e-15));

  // zero net with z0 = 0: loss = mean(zT^2)
  CallbackVelocityNet<double> zero({1, 2, 2}, 2, [&](const Tensor<double>& z, auto&, auto&) {
    return Tensor<double>(z.shape);
  });
  double expect = 0;
  for (double v : zT.data) expect += v * v;
  expect /= static_cast<double>(zT.numel());
  CHECK(flow::rfm_loss(zero, z0, y, t, zT) == doctest::Approx(expect).epsilon(1e-12));

  CHECK(flow::rfm_loss(zero, z0, y, t, zT) >= 0.0);
  CHECK_THROWS_AS(flow::rfm_loss(zero, z0, y, {0.2, 1.5}, zT), std::domain_error);
}

TEST_CASE("rfm_loss gradient matches finite differences on a tiny net") {
  Rng rng(7);
  nets::MlpVelocityNet<double> net({1, 2, 2}, 2, 3, 4, rng);
  REQUIRE(nn::param_count(net.params()) <= 100);
  Tensor<double> z0({2, 1, 2, 2});
  Tensor<double> zT(z0.shape);
  for (auto& v : z0.data) v = rng.uniform(-1.0, 1.0);
  for (auto& v : zT.data) v = rng.normal();
  std::vector<int> y = {1, 0};
  std::vector<double> t = {0.3, 0.8};

  auto ps = net.params();
  auto loss = [&] { return flow::rfm_loss(net, z0, y, t, zT, false); };
  auto backward = [&] { return flow::rfm_loss(net, z0, y, t, zT, true); };
  testing::grad_check(ps, loss, backward);
}

TEST_CASE("sampler: constant field is integrated exactly for any step count") {
  Rng rng(11);
  Tensor<double> c({1, 1, 2, 2});
  for (auto& v : c.data) v = rng.uniform(-0.5, 0.5);
  CallbackVelocityNet<double> net({1, 2, 2}, 1, [&](const Tensor<double>& z, auto&, auto&) {
    Tensor<double> out(z.shape);
    const long per = c.numel();
    for (int i = 0; i < z.dim(0); ++i) std::copy_n(c.ptr(), per, out.ptr() + i * per);
    return out;
  });

  // reproduce the seeded initial draw to know z(1)
  flow::SamplerConfig probe;
  probe.num_steps = 1;
  probe.clamp_output = false;
  probe.seed = 42;
  Tensor<double> z1({1, 1, 2, 2});
  {
    Rng r(derive_seed(probe.seed, "sample", 0));
    for (auto& v : z1.data) v = r.normal();
  }
  for (int steps : {1, 3, 7, 50}) {
    flow::SamplerConfig cfg;
    cfg.num_steps = steps;
    cfg.clamp_output = false;
    cfg.seed = 42;
    auto out = flow::sample_features(net, 0, cfg);
    for (long i = 0; i < out.numel(); ++i)
      CHECK(out[i] == doctest::Approx(z1[i] - c[i]).epsilon(1e-12));
  }
}

TEST_CASE("sampler: exact memorized field recovers z0 for any step count") {
  flow::SamplerConfig cfg;
  cfg.num_steps = 1;
  cfg.clamp_output = false;
  cfg.seed = 99;
  Tensor<double> zT({1, 2, 2, 1});
  {
    Rng r(derive_seed(cfg.seed, "sample", 0));
    for (auto& v : zT.data) v = r.normal();
  }
  Tensor<double> z0({1, 2, 2, 1}, {0.4, -0.2, 0.9, -0.7});
  Tensor<double> field(z0.shape);
  kern::vsub<double>(4, zT.ptr(), z0.ptr(), field.ptr());
  testing::CallbackVelocityNet<double> net({2, 2, 1}, 1,
                                           [&](const Tensor<double>& z, auto&, auto&) {
                                             Tensor<double> out(z.shape);
                                             std::copy_n(field.ptr(), 4, out.ptr());
                                             return out;
                                           });
  for (int steps : {1, 2, 13, 64}) {
    cfg.num_steps = steps;
    auto out = flow::sample_features(net, 0, cfg);
    for (long i = 0; i < 4; ++i) CHECK(std::abs(out[i] - z0[i]) < 1e-6);
  }
}

TEST_CASE("sampler determinism and batching consistency") {
  Rng rng(13);
  nets::MlpVelocityNet<float> net({1, 3, 3}, 3, 8, 8, rng);
  flow::SamplerConfig cfg;
  cfg.num_steps = 10;
  cfg.seed = 7;

  auto a = flow::sample_features(net, 1, cfg);
  auto b = flow::sample_features(net, 1, cfg);
  CHECK(a.data == b.data);  // bit-identical

  // batched draw with the same per-sample streams matches the single draw
  auto batch = flow::sample_features_batch(net, {1, 2}, cfg);
  for (long i = 0; i < a.numel(); ++i) CHECK(batch[i] == a[i]);
}

TEST_CASE("sampler clamps output into [-1,1] when configured") {
  CallbackVelocityNet<float> net({1, 2, 2}, 1, [](const Tensor<float>& z, auto&, auto&) {
    Tensor<float> out(z.shape);
    out.fill(-50.0f);  // drives z very positive after backward integration
    return out;
  });
  flow::SamplerConfig cfg;
  cfg.num_steps = 4;
  cfg.seed = 3;
  cfg.clamp_output = true;
  auto out = flow::sample_features(net, 0, cfg);
  for (long i = 0; i < out.numel(); ++i) {
    CHECK(out[i] <= 1.0f);
    CHECK(out[i] >= -1.0f);
  }
  CHECK(kern::max<float>(static_cast<int>(out.numel()), out.ptr()) == 1.0f);
}

TEST_CASE("ddpm_train_step: exact-epsilon oracle gives zero loss") {
  flow::DdpmConfig dcfg;
  dcfg.num_timesteps = 50;
  const flow::DdpmSchedule<double> sched(dcfg);
  // with z0 = 0 the noised input is sqrt(1-ab_k) * eps, so the exact noise
  // is recoverable from (z_t, t) alone
  CallbackVelocityNet<double> oracle(
      {1, 2, 2}, 1, [&](const Tensor<double>& z, const std::vector<double>& t, auto&) {
        Tensor<double> out(z.shape);
        const long per = z.numel() / z.dim(0);
        for (int i = 0; i < z.dim(0); ++i) {
          const int k = static_cast<int>(std::lround(t[static_cast<std::size_t>(i)] * 50)) - 1;
          const double sn = std::sqrt(1.0 - sched.alpha_bars[static_cast<std::size_t>(k)]);
          for (long j = 0; j < per; ++j) out.ptr()[i * per + j] = z.ptr()[i * per + j] / sn;
        }
        return out;
      });
  Tensor<double> z0({4, 1, 2, 2});
  std::vector<int> y(4, 0);
  Rng rng(17);
  const double loss = flow::ddpm_train_step(oracle, z0, y, sched, rng);
  CHECK(loss == doctest::Approx(0.0).epsilon(1e-18));
}

TEST_CASE("ddpm_train_step: zero net loss is ~1 per element (Monte Carlo)") {
  flow::DdpmConfig dcfg;
  const flow::DdpmSchedule<double> sched(dcfg);
  CallbackVelocityNet<double> zero({1, 4, 4}, 1, [](const Tensor<double>& z, auto&, auto&) {
    return Tensor<double>(z.shape);
  });
  Rng rng(23);
  double total = 0;
  const int reps = 40, batch = 16;  // 40*16*16 = 10240 noise draws
  for (int r = 0; r < reps; ++r) {
    Tensor<double> z0({batch, 1, 4, 4});
    std::vector<int> y(batch, 0);
    total += flow::ddpm_train_step(zero, z0, y, sched, rng);
  }
  CHECK(total / reps == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("ddpm gradient matches finite differences on a tiny net") {
  Rng rng(29);
  nets::MlpVelocityNet<double> net({1, 2, 2}, 2, 3, 4, rng);
  flow::DdpmConfig dcfg;
  dcfg.num_timesteps = 10;
  const flow::DdpmSchedule<double> sched(dcfg);
  Tensor<double> z0({2, 1, 2, 2});
  for (auto& v : z0.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> y = {0, 1};

  // freeze the timestep/noise draw so loss() and backward() see one batch
  auto ps = net.params();
  auto loss = [&] {
    Rng frozen(1234);
    return flow::ddpm_train_step(net, z0, y, sched, frozen, false);
  };
  auto backward = [&] {
    Rng frozen(1234);
    return flow::ddpm_train_step(net, z0, y, sched, frozen, true);
  };
  testing::grad_check(ps, loss, backward);
}

TEST_CASE("ddpm sampling: determinism and single-step degenerate schedule") {
  Rng rng(31);
  nets::MlpVelocityNet<float> net({1, 2, 2}, 2, 6, 4, rng);
  flow::DdpmConfig cfg;
  cfg.num_timesteps = 1;
  cfg.seed = 5;
  auto a = flow::ddpm_sample(net, 0, cfg);
  auto b = flow::ddpm_sample(net, 0, cfg);
  CHECK(a.data == b.data);

  // single step: output is a deterministic function of the initial draw
  Tensor<float> z1({1, 1, 2, 2});
  {
    Rng r(derive_seed(cfg.seed, "sample", 0));
    for (auto& v : z1.data) v = static_cast<float>(r.normal());
  }
  const flow::DdpmSchedule<float> sched(cfg);
  std::vector<float> t = {sched.embed_time(0)};
  auto eps = net.forward(z1.reshaped({1, 1, 2, 2}), t, {0});
  const float a0 = sched.alphas[0], ab0 = sched.alpha_bars[0];
  for (long i = 0; i < 4; ++i) {
    float expect = (z1[i] - (1.0f - a0) / std::sqrt(1.0f - ab0) * eps[i]) / std::sqrt(a0);
    expect = std::clamp(expect, -1.0f, 1.0f);
    CHECK(a[i] == doctest::Approx(expect).epsilon(1e-5));
  }

  cfg.num_timesteps = 1000;
  CHECK_NOTHROW([&] { flow::DdpmSchedule<float> s(cfg); (void)s; }());
  cfg.beta_start = 0.5;
  cfg.beta_end = 0.1;
  CHECK_THROWS_AS([&] { flow::DdpmSchedule<float> s(cfg); (void)s; }(), std::invalid_argument);
}

TEST_CASE("step refinement: halving the step size shrinks the solution gap") {
  // quick RFM fit on a 2-d toy set, then first-order consistency over seeds
  Rng rng(37);
  nets::MlpVelocityNet<double> net({1, 1, 2}, 1, 24, 16, rng);
  const int n = 128;
  Tensor<double> feats({n, 1, 1, 2});
  std::vector<int> labels(n, 0);
  Rng data_rng(41);
  for (int i = 0; i < n; ++i) {
    feats.at4(i, 0, 0, 0) = 0.6 + 0.05 * data_rng.normal();
    feats.at4(i, 0, 0, 1) = -0.4 + 0.05 * data_rng.normal();
  }
  flow::FlowTrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 32;
  tc.learning_rate = 2e-3;
  tc.optimizer = "adam";
  tc.seed = 43;
  flow::train_rfm(net, feats, labels, tc);

  double gap_coarse = 0, gap_fine = 0;
  const int seeds = 8, base = 4;
  for (int s = 0; s < seeds; ++s) {
    flow::SamplerConfig c1, c2, c4;
    c1.num_steps = base;
    c2.num_steps = 2 * base;
    c4.num_steps = 4 * base;
    c1.seed = c2.seed = c4.seed = 1000 + static_cast<std::uint64_t>(s);
    c1.clamp_output = c2.clamp_output = c4.clamp_output = false;
    auto a = flow::sample_features(net, 0, c1);
    auto b = flow::sample_features(net, 0, c2);
    auto c = flow::sample_features(net, 0, c4);
    gap_coarse += std::sqrt(kern::sqdiff_sum<double>(2, a.ptr(), b.ptr()));
    gap_fine += std::sqrt(kern::sqdiff_sum<double>(2, b.ptr(), c.ptr()));
  }
  CHECK(gap_fine / seeds <= gap_coarse / seeds + 1e-3);
}
