// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Gradient sanity for every layer and network role: analytic backward vs
// central finite differences at float64.
#include <doctest.h>

#include <functional>
#include <memory>

#include "fgrf/losses.hpp"
#include "fgrf/nets.hpp"
#include "fgrf/nn.hpp"
#include "grad_check.hpp"

using namespace fgrf;
using testing::fill_random;
using testing::grad_check;

namespace {

// Direct convolution, no im2col: independent oracle for the forward pass.
Tensor<double> conv2d_direct(const Tensor<double>& x, const Tensor<double>& w,
                             const Tensor<double>& b, int stride, int pad) {
  const int n = x.dim(0), ic = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const int oc = w.dim(0), k = w.dim(2);
  const int oh = (ih + 2 * pad - k) / stride + 1;
  const int ow = (iw + 2 * pad - k) / stride + 1;
  Tensor<double> y({n, oc, oh, ow});
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < oc; ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double acc = b[o];
          for (int c = 0; c < ic; ++c)
            for (int u = 0; u < k; ++u)
              for (int v = 0; v < k; ++v) {
                const int yy = i * stride - pad + u;
                const int xx = j * stride - pad + v;
                if (yy >= 0 && yy < ih && xx >= 0 && xx < iw)
                  acc += x.at4(s, c, yy, xx) * w.at4(o, c, u, v);
              }
          y.at4(s, o, i, j) = acc;
        }
  return y;
}

Tensor<double> random_target(const std::vector<int>& shape, Rng& rng) {
  Tensor<double> t(shape);
  fill_random(t, rng);
  return t;
}

}  // namespace

TEST_CASE("conv2d forward matches direct convolution") {
  Rng rng(3);
  nn::Conv2d<double> conv(2, 3, 3, 2, 1, rng);
  Tensor<double> x({2, 2, 7, 6});
  fill_random(x, rng);
  nn::ParamList<double> ps;
  conv.collect_params("conv", ps);
  auto y = conv.forward(x);
  auto ref = conv2d_direct(x, *ps[0].value, *ps[1].value, 2, 1);
  REQUIRE(y.shape == ref.shape);
  for (long i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("conv2d gradients (params and input)") {
  Rng rng(5);
  nn::Conv2d<double> conv(2, 3, 3, 2, 1, rng);
  Tensor<double> x({2, 2, 5, 5});
  fill_random(x, rng);
  auto target = random_target({2, 3, 3, 3}, rng);

  Tensor<double> xgrad = Tensor<double>::zeros_like(x);
  nn::ParamList<double> ps;
  conv.collect_params("conv", ps);
  ps.push_back({"input", &x, &xgrad});

  auto loss = [&] { return static_cast<double>(nn::mse(conv.forward(x), target).value); };
  auto backward = [&] {
    auto out = conv.forward(x);
    auto l = nn::mse(out, target);
    auto dx = conv.backward(l.grad);
    kern::vadd<double>(static_cast<int>(dx.numel()), dx.ptr(), xgrad.ptr(), xgrad.ptr());
    return static_cast<double>(l.value);
  };
  auto res = grad_check(ps, loss, backward);
  CHECK(res.checked > 50);
}

TEST_CASE("conv_transpose2d gradients, stride 1 and 2") {
  for (int stride : {1, 2}) {
    Rng rng(7 + stride);
    nn::ConvTranspose2d<double> tconv(3, 2, 3, stride, 1, rng);
    Tensor<double> x({2, 3, 4, 4});
    fill_random(x, rng);
    const int oh = (4 - 1) * stride - 2 + 3;
    auto target = random_target({2, 2, oh, oh}, rng);

    Tensor<double> xgrad = Tensor<double>::zeros_like(x);
    nn::ParamList<double> ps;
    tconv.collect_params("tconv", ps);
    ps.push_back({"input", &x, &xgrad});

    auto loss = [&] { return static_cast<double>(nn::mse(tconv.forward(x), target).value); };
    auto backward = [&] {
      auto l = nn::mse(tconv.forward(x), target);
      auto dx = tconv.backward(l.grad);
      kern::vadd<double>(static_cast<int>(dx.numel()), dx.ptr(), xgrad.ptr(), xgrad.ptr());
      return static_cast<double>(l.value);
    };
    grad_check(ps, loss, backward);
  }
}

TEST_CASE("linear + activations gradients") {
  Rng rng(11);
  nn::Linear<double> fc(6, 4, rng);
  nn::SiLU<double> act;
  nn::Tanh<double> th;
  Tensor<double> x({3, 6});
  fill_random(x, rng);
  auto target = random_target({3, 4}, rng);

  Tensor<double> xgrad = Tensor<double>::zeros_like(x);
  nn::ParamList<double> ps;
  fc.collect_params("fc", ps);
  ps.push_back({"input", &x, &xgrad});

  auto loss = [&] {
    return static_cast<double>(nn::mse(th.forward(act.forward(fc.forward(x))), target).value);
  };
  auto backward = [&] {
    auto l = nn::mse(th.forward(act.forward(fc.forward(x))), target);
    auto dx = fc.backward(act.backward(th.backward(l.grad)));
    kern::vadd<double>(static_cast<int>(dx.numel()), dx.ptr(), xgrad.ptr(), xgrad.ptr());
    return static_cast<double>(l.value);
  };
  grad_check(ps, loss, backward);
}

TEST_CASE("batchnorm2d gradients (train mode)") {
  Rng rng(13);
  nn::BatchNorm2d<double> bn(3);
  Tensor<double> x({2, 3, 4, 4});
  fill_random(x, rng, -2.0, 2.0);
  auto target = random_target({2, 3, 4, 4}, rng);

  Tensor<double> xgrad = Tensor<double>::zeros_like(x);
  nn::ParamList<double> ps;
  bn.collect_params("bn", ps);
  ps.push_back({"input", &x, &xgrad});

  // running-stat updates do not affect the train-mode output; loss() uses a
  // fresh forward each call so the FD sweep stays consistent
  auto loss = [&] { return static_cast<double>(nn::mse(bn.forward(x, true), target).value); };
  auto backward = [&] {
    auto l = nn::mse(bn.forward(x, true), target);
    auto dx = bn.backward(l.grad);
    kern::vadd<double>(static_cast<int>(dx.numel()), dx.ptr(), xgrad.ptr(), xgrad.ptr());
    return static_cast<double>(l.value);
  };
  grad_check(ps, loss, backward);
}

TEST_CASE("layernorm gradients") {
  Rng rng(17);
  nn::LayerNorm<double> ln(5);
  Tensor<double> x({4, 5});
  fill_random(x, rng);
  auto target = random_target({4, 5}, rng);

  Tensor<double> xgrad = Tensor<double>::zeros_like(x);
  nn::ParamList<double> ps;
  ln.collect_params("ln", ps);
  ps.push_back({"input", &x, &xgrad});

  auto loss = [&] { return static_cast<double>(nn::mse(ln.forward(x), target).value); };
  auto backward = [&] {
    auto l = nn::mse(ln.forward(x), target);
    auto dx = ln.backward(l.grad);
    kern::vadd<double>(static_cast<int>(dx.numel()), dx.ptr(), xgrad.ptr(), xgrad.ptr());
    return static_cast<double>(l.value);
  };
  grad_check(ps, loss, backward);
}

TEST_CASE("transformer block gradients") {
  Rng rng(19);
  nn::TransformerBlock<double> block(8, 2, 2, rng);
  Tensor<double> x({2, 4, 8});
  fill_random(x, rng);
  auto target = random_target({2, 4, 8}, rng);

  Tensor<double> xgrad = Tensor<double>::zeros_like(x);
  nn::ParamList<double> ps;
  block.collect_params("block", ps);
  ps.push_back({"input", &x, &xgrad});

  auto loss = [&] { return static_cast<double>(nn::mse(block.forward(x), target).value); };
  auto backward = [&] {
    auto l = nn::mse(block.forward(x), target);
    auto dx = block.backward(l.grad);
    kern::vadd<double>(static_cast<int>(dx.numel()), dx.ptr(), xgrad.ptr(), xgrad.ptr());
    return static_cast<double>(l.value);
  };
  auto res = grad_check(ps, loss, backward, 1e-5, 2e-3);
  CHECK(res.checked > 300);
}

TEST_CASE("small_cnn gradients with tap injection") {
  Rng rng(23);
  nets::SmallCnnClassifier<double> clf(1, 6, 6, 3, 2, 3, rng);
  Tensor<double> x({2, 1, 6, 6});
  fill_random(x, rng);
  std::vector<int> labels = {0, 2};
  auto fwd0 = clf.forward(x, false);
  auto tap_target = random_target(fwd0.tap.shape, rng);

  auto ps = clf.params();
  auto loss = [&] {
    auto out = clf.forward(x, false);
    auto ce = nn::softmax_cross_entropy(out.logits, labels);
    auto fe = nn::mse(out.tap, tap_target);
    return static_cast<double>(ce.value) + 0.3 * static_cast<double>(fe.value);
  };
  auto backward = [&] {
    auto out = clf.forward(x, false);
    auto ce = nn::softmax_cross_entropy(out.logits, labels);
    auto fe = nn::mse(out.tap, tap_target);
    kern::scal<double>(static_cast<int>(fe.grad.numel()), 0.3, fe.grad.ptr());
    clf.backward(ce.grad, &fe.grad);
    return static_cast<double>(ce.value) + 0.3 * static_cast<double>(fe.value);
  };
  grad_check(ps, loss, backward);
}

TEST_CASE("resnet18 (tiny width) gradients") {
  Rng rng(29);
  nets::ResNetClassifier<double> clf(1, 8, 8, 2, 2, 3, rng);
  Tensor<double> x({2, 1, 8, 8});
  fill_random(x, rng, 0.0, 1.0);
  std::vector<int> labels = {1, 0};

  auto ps = clf.params();
  auto loss = [&] {
    auto out = clf.forward(x, true);
    return static_cast<double>(nn::softmax_cross_entropy(out.logits, labels).value);
  };
  auto backward = [&] {
    auto out = clf.forward(x, true);
    auto ce = nn::softmax_cross_entropy(out.logits, labels);
    clf.backward(ce.grad, nullptr);
    return static_cast<double>(ce.value);
  };
  auto res = grad_check(ps, loss, backward, 1e-5, 2e-3);
  CHECK(res.checked > 500);
}

TEST_CASE("mlp velocity net gradients") {
  Rng rng(31);
  nets::MlpVelocityNet<double> net({1, 3, 3}, 4, 6, 8, rng);
  Tensor<double> z({2, 1, 3, 3});
  fill_random(z, rng);
  std::vector<double> t = {0.25, 0.7};
  std::vector<int> y = {1, 3};
  auto target = random_target({2, 1, 3, 3}, rng);

  auto ps = net.params();
  auto loss = [&] { return static_cast<double>(nn::mse(net.forward(z, t, y), target).value); };
  auto backward = [&] {
    auto l = nn::mse(net.forward(z, t, y), target);
    net.backward(l.grad);
    return static_cast<double>(l.value);
  };
  grad_check(ps, loss, backward);
}

TEST_CASE("attention velocity net gradients") {
  Rng rng(37);
  nets::AttentionVelocityNet<double> net({1, 4, 4}, 3, 8, 2, 2, rng);
  Tensor<double> z({2, 1, 4, 4});
  fill_random(z, rng);
  std::vector<double> t = {0.1, 0.9};
  std::vector<int> y = {0, 2};
  auto target = random_target({2, 1, 4, 4}, rng);

  auto ps = net.params();
  auto loss = [&] { return static_cast<double>(nn::mse(net.forward(z, t, y), target).value); };
  auto backward = [&] {
    auto l = nn::mse(net.forward(z, t, y), target);
    net.backward(l.grad);
    return static_cast<double>(l.value);
  };
  auto res = grad_check(ps, loss, backward, 1e-5, 2e-3);
  CHECK(res.checked > 500);
}

TEST_CASE("extractor + decoder gradients") {
  Rng rng(41);
  nets::FeatureExtractor<double> ext(1, 3, rng);
  nets::FeatureDecoder<double> dec(1, 3, rng);
  Tensor<double> x({2, 1, 5, 5});
  fill_random(x, rng, 0.0, 1.0);

  nn::ParamList<double> ps = ext.params();
  for (auto& p : dec.params()) ps.push_back(p);

  // round-trip reconstruction objective couples both nets
  auto loss = [&] {
    return static_cast<double>(nn::mse(dec.forward(ext.forward(x)), x).value);
  };
  auto backward = [&] {
    auto l = nn::mse(dec.forward(ext.forward(x)), x);
    ext.backward(dec.backward(l.grad));
    return static_cast<double>(l.value);
  };
  grad_check(ps, loss, backward);
}

TEST_CASE("loss gradients w.r.t. logits") {
  Rng rng(43);
  Tensor<double> logits({3, 4});
  fill_random(logits, rng, -2.0, 2.0);
  Tensor<double> teacher({3, 4});
  fill_random(teacher, rng, -2.0, 2.0);
  std::vector<int> labels = {0, 3, 1};
  Tensor<double> lgrad = Tensor<double>::zeros_like(logits);
  nn::ParamList<double> ps = {{"logits", &logits, &lgrad}};

  SUBCASE("cross entropy") {
    auto loss = [&] { return static_cast<double>(nn::softmax_cross_entropy(logits, labels).value); };
    auto backward = [&] {
      auto l = nn::softmax_cross_entropy(logits, labels);
      lgrad = l.grad;
      return static_cast<double>(l.value);
    };
    grad_check(ps, loss, backward);
  }
  SUBCASE("kl at T=2.5") {
    auto loss = [&] { return static_cast<double>(nn::kl_divergence(teacher, logits, 2.5).value); };
    auto backward = [&] {
      auto l = nn::kl_divergence(teacher, logits, 2.5);
      lgrad = l.grad;
      return static_cast<double>(l.value);
    };
    grad_check(ps, loss, backward);
  }
}
