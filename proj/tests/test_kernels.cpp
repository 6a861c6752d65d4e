// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar/AVX2 kernel equivalence. The scalar reference path is the ground
// truth; the vectorized variants must agree within FMA-reassociation noise.
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fgrf/kernels.hpp"
#include "fgrf/rng.hpp"

using namespace fgrf;

namespace {

std::vector<float> random_vec(Rng& rng, int n, double lo = -2.0, double hi = 2.0) {
  std::vector<float> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return v;
}

void expect_close(const std::vector<float>& a, const std::vector<float>& b, double atol,
                  double rtol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double tol = atol + rtol * std::abs(static_cast<double>(b[i]));
    CAPTURE(i);
    CHECK(std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])) <= tol);
  }
}

bool have_avx2() { return kern::avx2_supported(); }

}  // namespace

TEST_CASE("gemm variants match scalar reference") {
  if (!have_avx2()) return;
  const auto& sc = kern::f32_table(kern::Backend::scalar);
  const auto& vx = kern::f32_table(kern::Backend::avx2);
  Rng rng(7);
  // deliberately awkward sizes to hit the remainder tails
  for (auto [m, n, k] : {std::array<int, 3>{1, 1, 1},
                         {3, 5, 7},
                         {8, 8, 8},
                         {13, 17, 9},
                         {32, 33, 31},
                         {5, 64, 21}}) {
    auto a = random_vec(rng, m * k);
    auto bn = random_vec(rng, k * n);
    auto bt = random_vec(rng, n * k);
    auto at = random_vec(rng, k * m);
    for (bool acc : {false, true}) {
      std::vector<float> c0 = random_vec(rng, m * n), c1 = c0;
      sc.gemm_nn(a.data(), bn.data(), c0.data(), m, n, k, acc);
      vx.gemm_nn(a.data(), bn.data(), c1.data(), m, n, k, acc);
      expect_close(c1, c0, 1e-5, 1e-5);

      c0 = random_vec(rng, m * n);
      c1 = c0;
      sc.gemm_nt(a.data(), bt.data(), c0.data(), m, n, k, acc);
      vx.gemm_nt(a.data(), bt.data(), c1.data(), m, n, k, acc);
      expect_close(c1, c0, 1e-5, 1e-5);

      c0 = random_vec(rng, m * n);
      c1 = c0;
      sc.gemm_tn(at.data(), bn.data(), c0.data(), m, n, k, acc);
      vx.gemm_tn(at.data(), bn.data(), c1.data(), m, n, k, acc);
      expect_close(c1, c0, 1e-5, 1e-5);
    }
  }
}

TEST_CASE("elementwise and reduction kernels match scalar reference") {
  if (!have_avx2()) return;
  const auto& sc = kern::f32_table(kern::Backend::scalar);
  const auto& vx = kern::f32_table(kern::Backend::avx2);
  Rng rng(11);
  for (int n : {1, 2, 7, 8, 9, 31, 64, 207}) {
    auto x = random_vec(rng, n, -6.0, 6.0);
    auto y = random_vec(rng, n, -6.0, 6.0);
    std::vector<float> o0(static_cast<std::size_t>(n)), o1(o0);

    sc.vadd(n, x.data(), y.data(), o0.data());
    vx.vadd(n, x.data(), y.data(), o1.data());
    expect_close(o1, o0, 0.0, 0.0);

    sc.vsub(n, x.data(), y.data(), o0.data());
    vx.vsub(n, x.data(), y.data(), o1.data());
    expect_close(o1, o0, 0.0, 0.0);

    sc.vmul(n, x.data(), y.data(), o0.data());
    vx.vmul(n, x.data(), y.data(), o1.data());
    expect_close(o1, o0, 0.0, 0.0);

    sc.lerp(n, x.data(), y.data(), 0.3f, o0.data());
    vx.lerp(n, x.data(), y.data(), 0.3f, o1.data());
    expect_close(o1, o0, 1e-6, 1e-6);

    auto y0 = y, y1 = y;
    sc.axpy(n, 0.37f, x.data(), y0.data());
    vx.axpy(n, 0.37f, x.data(), y1.data());
    expect_close(y1, y0, 1e-6, 1e-6);

    auto x0 = x, x1 = x;
    sc.scal(n, -1.25f, x0.data());
    vx.scal(n, -1.25f, x1.data());
    expect_close(x1, x0, 0.0, 0.0);

    CHECK(std::abs(sc.dot(n, x.data(), y.data()) - vx.dot(n, x.data(), y.data())) <=
          1e-4 + 1e-5 * std::abs(sc.dot(n, x.data(), y.data())));
    CHECK(std::abs(sc.sum(n, x.data()) - vx.sum(n, x.data())) <= 1e-4);
    CHECK(sc.max(n, x.data()) == vx.max(n, x.data()));
    CHECK(std::abs(sc.sqdiff_sum(n, x.data(), y.data()) - vx.sqdiff_sum(n, x.data(), y.data())) <=
          1e-4 + 1e-5 * sc.sqdiff_sum(n, x.data(), y.data()));

    sc.vexp(n, x.data(), o0.data());
    vx.vexp(n, x.data(), o1.data());
    expect_close(o1, o0, 1e-6, 2e-6);

    sc.vtanh(n, x.data(), o0.data());
    vx.vtanh(n, x.data(), o1.data());
    expect_close(o1, o0, 1e-6, 1e-5);

    sc.vsigmoid(n, x.data(), o0.data());
    vx.vsigmoid(n, x.data(), o1.data());
    expect_close(o1, o0, 1e-6, 1e-5);

    sc.relu_fwd(n, x.data(), o0.data());
    vx.relu_fwd(n, x.data(), o1.data());
    expect_close(o1, o0, 0.0, 0.0);

    sc.relu_bwd(n, x.data(), y.data(), o0.data());
    vx.relu_bwd(n, x.data(), y.data(), o1.data());
    expect_close(o1, o0, 0.0, 0.0);
  }
}

TEST_CASE("vexp/vtanh edge values stay sane") {
  if (!have_avx2()) return;
  const auto& vx = kern::f32_table(kern::Backend::avx2);
  std::vector<float> x = {-100.0f, -20.0f, -1.0f, 0.0f, 1e-6f, 1.0f, 20.0f, 100.0f};
  std::vector<float> y(x.size());
  vx.vexp(static_cast<int>(x.size()), x.data(), y.data());
  CHECK(y[0] >= 0.0f);
  CHECK(std::isfinite(y[7]));
  CHECK(y[3] == doctest::Approx(1.0f));
  vx.vtanh(static_cast<int>(x.size()), x.data(), y.data());
  for (float v : y) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }
  CHECK(y[3] == 0.0f);
}

TEST_CASE("backend dispatch honors set_backend") {
  auto prev = kern::active_backend();
  kern::set_backend(kern::Backend::scalar);
  CHECK(std::string(kern::f32().name) == "scalar");
  if (have_avx2()) {
    kern::set_backend(kern::Backend::avx2);
    CHECK(std::string(kern::f32().name) == "avx2");
  }
  kern::set_backend(prev);
}
