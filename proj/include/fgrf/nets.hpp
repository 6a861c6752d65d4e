// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// The four trainable roles: feature extractor, classifier with an
// intermediate tap, conditional velocity-field network, feature decoder.
// Classifiers and velocity nets are architecture-agnostic interfaces with
// desk-scale implementations behind string-keyed factories.
#pragma once

#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fgrf/attention.hpp"
#include "fgrf/nn.hpp"

namespace fgrf::nets {

using nn::ParamList;

template <class T>
using BufferList = std::vector<std::pair<std::string, Tensor<T>*>>;

// ---------------------------------------------------------------------------
// FeatureExtractor: one channel-preserving convolution + tanh.
// Output lives strictly inside (-1, 1) and never leaves the client.
// ---------------------------------------------------------------------------

template <class T>
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(int channels, int kernel, Rng& rng)
      : channels_(channels), kernel_(kernel),
        conv_(channels, channels, kernel, 1, kernel / 2, rng) {
    if (kernel % 2 == 0) throw std::invalid_argument("extractor: kernel must be odd");
  }

  Tensor<T> forward(const Tensor<T>& image) { return tanh_.forward(conv_.forward(image)); }

  Tensor<T> backward(const Tensor<T>& dfeat) { return conv_.backward(tanh_.backward(dfeat)); }

  ParamList<T> params() {
    ParamList<T> ps;
    conv_.collect_params("conv", ps);
    return ps;
  }

  std::string architecture_id() const {
    return "extractor/c" + std::to_string(channels_) + "/k" + std::to_string(kernel_);
  }

  int channels() const { return channels_; }
  nn::Conv2d<T>& conv() { return conv_; }

 private:
  int channels_ = 0, kernel_ = 3;
  nn::Conv2d<T> conv_;
  nn::Tanh<T> tanh_;
};

// ---------------------------------------------------------------------------
// Classifier interface: logits plus a tapped intermediate feature map from
// the same forward pass. backward() accepts an optional gradient injected at
// the tap (the feature-alignment path) and returns the input gradient.
// ---------------------------------------------------------------------------

template <class T>
struct ClassifierOutput {
  Tensor<T> logits;
  Tensor<T> tap;
};

template <class T>
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ClassifierOutput<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dlogits, const Tensor<T>* dtap) = 0;
  virtual ParamList<T> params() = 0;
  virtual BufferList<T> buffers() { return {}; }
  virtual std::string architecture_id() const = 0;
  virtual std::unique_ptr<Classifier<T>> clone() const = 0;
  virtual int num_classes() const = 0;
  virtual int tap_layer() const = 0;
  virtual void set_tap_layer(int t) = 0;
};

// ---------------------------------------------------------------------------
// SmallCnn: the desk-scale default. Four blocks;
//   1: conv(C->w)+relu        2: conv(w->2w, stride 2)+relu
//   3: conv(2w->2w)+relu      4: global average pool (tap 4 = pooled vector)
// followed by a linear head. Tap defaults to block 3.
// ---------------------------------------------------------------------------

template <class T>
class SmallCnnClassifier final : public Classifier<T> {
 public:
  SmallCnnClassifier(int in_ch, int in_h, int in_w, int num_classes, int width, int tap_layer,
                     Rng& rng)
      : in_ch_(in_ch), in_h_(in_h), in_w_(in_w), classes_(num_classes), width_(width),
        tap_(tap_layer),
        conv1_(in_ch, width, 3, 1, 1, rng),
        conv2_(width, 2 * width, 3, 2, 1, rng),
        conv3_(2 * width, 2 * width, 3, 1, 1, rng),
        fc_(2 * width, num_classes, rng) {
    if (tap_layer < 1 || tap_layer > 4) throw std::invalid_argument("small_cnn: tap_layer in 1..4");
  }

  ClassifierOutput<T> forward(const Tensor<T>& x, bool) override {
    auto a1 = r1_.forward(conv1_.forward(x));
    auto a2 = r2_.forward(conv2_.forward(a1));
    auto a3 = r3_.forward(conv3_.forward(a2));
    auto g = pool_.forward(a3);
    auto logits = fc_.forward(g);
    const Tensor<T>* taps[4] = {&a1, &a2, &a3, &g};
    return {std::move(logits), *taps[tap_ - 1]};
  }

  Tensor<T> backward(const Tensor<T>& dlogits, const Tensor<T>* dtap) override {
    auto dg = fc_.backward(dlogits);
    if (dtap && tap_ == 4) add_into(dg, *dtap);
    auto da3 = pool_.backward(dg);
    if (dtap && tap_ == 3) add_into(da3, *dtap);
    auto da2 = conv3_.backward(r3_.backward(da3));
    if (dtap && tap_ == 2) add_into(da2, *dtap);
    auto da1 = conv2_.backward(r2_.backward(da2));
    if (dtap && tap_ == 1) add_into(da1, *dtap);
    return conv1_.backward(r1_.backward(da1));
  }

  ParamList<T> params() override {
    ParamList<T> ps;
    conv1_.collect_params("conv1", ps);
    conv2_.collect_params("conv2", ps);
    conv3_.collect_params("conv3", ps);
    fc_.collect_params("fc", ps);
    return ps;
  }

  std::string architecture_id() const override {
    std::ostringstream os;
    os << "small_cnn/in" << in_ch_ << 'x' << in_h_ << 'x' << in_w_ << "/classes" << classes_
       << "/width" << width_;
    return os.str();
  }

  std::unique_ptr<Classifier<T>> clone() const override {
    return std::make_unique<SmallCnnClassifier<T>>(*this);
  }

  int num_classes() const override { return classes_; }
  int tap_layer() const override { return tap_; }
  void set_tap_layer(int t) override {
    if (t < 1 || t > 4) throw std::invalid_argument("small_cnn: tap_layer in 1..4");
    tap_ = t;
  }
  nn::Linear<T>& head() { return fc_; }

 private:
  static void add_into(Tensor<T>& dst, const Tensor<T>& src) {
    check_same_shape(dst.shape, src.shape, "tap gradient");
    kern::vadd<T>(static_cast<int>(dst.numel()), dst.ptr(), src.ptr(), dst.ptr());
  }

  int in_ch_, in_h_, in_w_, classes_, width_, tap_;
  nn::Conv2d<T> conv1_, conv2_, conv3_;
  nn::ReLU<T> r1_, r2_, r3_;
  nn::GlobalAvgPool<T> pool_;
  nn::Linear<T> fc_;
};

// ---------------------------------------------------------------------------
// ResNet-18, CIFAR-style stem (3x3, no maxpool), selectable for larger runs.
// width is the stem channel count (64 gives the standard parameterization).
// Tap layer t in 1..4 is the output of stage t.
// ---------------------------------------------------------------------------

template <class T>
struct BasicBlock {
  BasicBlock() = default;
  BasicBlock(int in_ch, int out_ch, int stride, Rng& rng)
      : conv1(in_ch, out_ch, 3, stride, 1, rng),
        bn1(out_ch),
        conv2(out_ch, out_ch, 3, 1, 1, rng),
        bn2(out_ch),
        projected(stride != 1 || in_ch != out_ch) {
    if (projected) {
      proj = nn::Conv2d<T>(in_ch, out_ch, 1, stride, 0, rng);
      proj_bn = nn::BatchNorm2d<T>(out_ch);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    auto m = bn2.forward(conv2.forward(r1.forward(bn1.forward(conv1.forward(x), train))), train);
    Tensor<T> s = projected ? proj_bn.forward(proj.forward(x), train) : x;
    Tensor<T> sum(m.shape);
    kern::vadd<T>(static_cast<int>(m.numel()), m.ptr(), s.ptr(), sum.ptr());
    return r2.forward(sum);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    auto dsum = r2.backward(dy);
    auto dx = conv1.backward(bn1.backward(r1.backward(conv2.backward(bn2.backward(dsum)))));
    if (projected) {
      auto dskip = proj.backward(proj_bn.backward(dsum));
      kern::vadd<T>(static_cast<int>(dx.numel()), dx.ptr(), dskip.ptr(), dx.ptr());
    } else {
      kern::vadd<T>(static_cast<int>(dx.numel()), dx.ptr(), dsum.ptr(), dx.ptr());
    }
    return dx;
  }

  void collect_params(const std::string& p, ParamList<T>& out) {
    conv1.collect_params(p + ".conv1", out);
    bn1.collect_params(p + ".bn1", out);
    conv2.collect_params(p + ".conv2", out);
    bn2.collect_params(p + ".bn2", out);
    if (projected) {
      proj.collect_params(p + ".proj", out);
      proj_bn.collect_params(p + ".proj_bn", out);
    }
  }
  void collect_buffers(const std::string& p, BufferList<T>& out) {
    bn1.collect_buffers(p + ".bn1", out);
    bn2.collect_buffers(p + ".bn2", out);
    if (projected) proj_bn.collect_buffers(p + ".proj_bn", out);
  }

  nn::Conv2d<T> conv1;
  nn::BatchNorm2d<T> bn1;
  nn::Conv2d<T> conv2;
  nn::BatchNorm2d<T> bn2;
  nn::ReLU<T> r1, r2;
  nn::Conv2d<T> proj;
  nn::BatchNorm2d<T> proj_bn;
  bool projected = false;
};

template <class T>
class ResNetClassifier final : public Classifier<T> {
 public:
  ResNetClassifier(int in_ch, int in_h, int in_w, int num_classes, int width, int tap_layer,
                   Rng& rng)
      : in_ch_(in_ch), in_h_(in_h), in_w_(in_w), classes_(num_classes), width_(width),
        tap_(tap_layer),
        stem_(in_ch, width, 3, 1, 1, rng),
        stem_bn_(width),
        fc_(8 * width, num_classes, rng) {
    if (tap_layer < 1 || tap_layer > 4) throw std::invalid_argument("resnet18: tap_layer in 1..4");
    int ch = width;
    for (int s = 0; s < 4; ++s) {
      const int out_ch = width << s;
      const int stride = s == 0 ? 1 : 2;
      blocks_[2 * s] = BasicBlock<T>(ch, out_ch, stride, rng);
      blocks_[2 * s + 1] = BasicBlock<T>(out_ch, out_ch, 1, rng);
      ch = out_ch;
    }
  }

  ClassifierOutput<T> forward(const Tensor<T>& x, bool train) override {
    auto h = stem_r_.forward(stem_bn_.forward(stem_.forward(x), train));
    Tensor<T> stage_out[4];
    for (int s = 0; s < 4; ++s) {
      h = blocks_[2 * s].forward(h, train);
      h = blocks_[2 * s + 1].forward(h, train);
      stage_out[s] = h;
    }
    auto g = pool_.forward(h);
    auto logits = fc_.forward(g);
    return {std::move(logits), stage_out[tap_ - 1]};
  }

  Tensor<T> backward(const Tensor<T>& dlogits, const Tensor<T>* dtap) override {
    auto d = pool_.backward(fc_.backward(dlogits));
    for (int s = 3; s >= 0; --s) {
      if (dtap && tap_ == s + 1) {
        check_same_shape(d.shape, dtap->shape, "tap gradient");
        kern::vadd<T>(static_cast<int>(d.numel()), d.ptr(), dtap->ptr(), d.ptr());
      }
      d = blocks_[2 * s + 1].backward(d);
      d = blocks_[2 * s].backward(d);
    }
    return stem_.backward(stem_bn_.backward(stem_r_.backward(d)));
  }

  ParamList<T> params() override {
    ParamList<T> ps;
    stem_.collect_params("stem", ps);
    stem_bn_.collect_params("stem_bn", ps);
    for (int i = 0; i < 8; ++i) blocks_[i].collect_params("block" + std::to_string(i), ps);
    fc_.collect_params("fc", ps);
    return ps;
  }

  BufferList<T> buffers() override {
    BufferList<T> bs;
    stem_bn_.collect_buffers("stem_bn", bs);
    for (int i = 0; i < 8; ++i) blocks_[i].collect_buffers("block" + std::to_string(i), bs);
    return bs;
  }

  std::string architecture_id() const override {
    std::ostringstream os;
    os << "resnet18/in" << in_ch_ << 'x' << in_h_ << 'x' << in_w_ << "/classes" << classes_
       << "/width" << width_;
    return os.str();
  }

  std::unique_ptr<Classifier<T>> clone() const override {
    return std::make_unique<ResNetClassifier<T>>(*this);
  }

  int num_classes() const override { return classes_; }
  int tap_layer() const override { return tap_; }
  void set_tap_layer(int t) override {
    if (t < 1 || t > 4) throw std::invalid_argument("resnet18: tap_layer in 1..4");
    tap_ = t;
  }

 private:
  int in_ch_, in_h_, in_w_, classes_, width_, tap_;
  nn::Conv2d<T> stem_;
  nn::BatchNorm2d<T> stem_bn_;
  nn::ReLU<T> stem_r_;
  BasicBlock<T> blocks_[8];
  nn::GlobalAvgPool<T> pool_;
  nn::Linear<T> fc_;
};

// ---------------------------------------------------------------------------
// Time embedding
// ---------------------------------------------------------------------------

/// Sinusoidal embedding of t in [0,1] (scaled by 1000 before the standard
/// frequency ladder so the leading channels resolve fine time steps).
template <class T>
Tensor<T> time_embedding(const std::vector<T>& t, int dim) {
  const int half = dim / 2;
  Tensor<T> out({static_cast<int>(t.size()), dim});
  for (std::size_t s = 0; s < t.size(); ++s) {
    const double ts = static_cast<double>(t[s]) * 1000.0;
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / half);
      out.at2(static_cast<int>(s), i) = static_cast<T>(std::cos(ts * freq));
      out.at2(static_cast<int>(s), half + i) = static_cast<T>(std::sin(ts * freq));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// VelocityNet interface: v = net(z, t, y), v shaped like z.
// ---------------------------------------------------------------------------

template <class T>
class VelocityNet {
 public:
  virtual ~VelocityNet() = default;
  virtual Tensor<T> forward(const Tensor<T>& z, const std::vector<T>& t,
                            const std::vector<int>& y) = 0;
  virtual void backward(const Tensor<T>& dv) = 0;
  virtual ParamList<T> params() = 0;
  virtual std::string architecture_id() const = 0;
  virtual std::unique_ptr<VelocityNet<T>> clone() const = 0;
  virtual std::vector<int> feature_shape() const = 0;  // [C, H, W]
  virtual int num_classes() const = 0;
};

// ---------------------------------------------------------------------------
// MLP velocity net over flattened features, sinusoidal time embedding plus
// additive learned label embedding. The desk-scale default.
// ---------------------------------------------------------------------------

template <class T>
class MlpVelocityNet final : public VelocityNet<T> {
 public:
  MlpVelocityNet(std::vector<int> feature_shape, int num_classes, int hidden, int embed_dim,
                 Rng& rng)
      : shape_(std::move(feature_shape)), classes_(num_classes), hidden_(hidden),
        embed_(embed_dim) {
    if (shape_.size() != 3) throw std::invalid_argument("velocity_mlp: feature shape is [C,H,W]");
    dim_ = shape_[0] * shape_[1] * shape_[2];
    in_proj_ = nn::Linear<T>(dim_, hidden, rng);
    cond_proj_ = nn::Linear<T>(embed_dim, hidden, rng);
    mid_ = nn::Linear<T>(hidden, hidden, rng);
    out_proj_ = nn::Linear<T>(hidden, dim_, rng);
    label_emb_ = nn::Embedding<T>(num_classes, embed_dim, rng);
  }

  Tensor<T> forward(const Tensor<T>& z, const std::vector<T>& t,
                    const std::vector<int>& y) override {
    const int n = z.dim(0);
    check_feature_shape(z);
    auto cond = time_embedding(t, embed_);
    auto lab = label_emb_.forward(y);
    kern::vadd<T>(static_cast<int>(cond.numel()), cond.ptr(), lab.ptr(), cond.ptr());
    auto h = in_proj_.forward(z.reshaped({n, dim_}));
    auto hc = cond_proj_.forward(cond);
    kern::vadd<T>(static_cast<int>(h.numel()), h.ptr(), hc.ptr(), h.ptr());
    auto a1 = act1_.forward(h);
    auto a2 = act2_.forward(mid_.forward(a1));
    auto v = out_proj_.forward(a2);
    std::vector<int> out_shape = {n, shape_[0], shape_[1], shape_[2]};
    return v.reshaped(out_shape);
  }

  void backward(const Tensor<T>& dv) override {
    const int n = dv.dim(0);
    auto dh = act1_.backward(mid_.backward(act2_.backward(out_proj_.backward(
        dv.reshaped({n, dim_})))));
    auto dcond = cond_proj_.backward(dh);
    label_emb_.backward(dcond);
    in_proj_.backward(dh);
  }

  ParamList<T> params() override {
    ParamList<T> ps;
    in_proj_.collect_params("in_proj", ps);
    cond_proj_.collect_params("cond_proj", ps);
    mid_.collect_params("mid", ps);
    out_proj_.collect_params("out_proj", ps);
    label_emb_.collect_params("label_emb", ps);
    return ps;
  }

  std::string architecture_id() const override {
    std::ostringstream os;
    os << "velocity_mlp/in" << shape_[0] << 'x' << shape_[1] << 'x' << shape_[2] << "/classes"
       << classes_ << "/hidden" << hidden_ << "/emb" << embed_;
    return os.str();
  }

  std::unique_ptr<VelocityNet<T>> clone() const override {
    return std::make_unique<MlpVelocityNet<T>>(*this);
  }
  std::vector<int> feature_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }

 private:
  void check_feature_shape(const Tensor<T>& z) const {
    if (z.rank() != 4 || z.dim(1) != shape_[0] || z.dim(2) != shape_[1] || z.dim(3) != shape_[2])
      throw std::invalid_argument("velocity_mlp: feature shape mismatch");
  }

  std::vector<int> shape_;
  int classes_ = 0, hidden_ = 0, embed_ = 0, dim_ = 0;
  nn::Linear<T> in_proj_, cond_proj_, mid_, out_proj_;
  nn::Embedding<T> label_emb_;
  nn::SiLU<T> act1_, act2_;
};

// ---------------------------------------------------------------------------
// Attention velocity net: patchify, add learned position + additive
// time/label conditioning, two pre-LN transformer blocks, project back.
// ---------------------------------------------------------------------------

template <class T>
class AttentionVelocityNet final : public VelocityNet<T> {
 public:
  AttentionVelocityNet(std::vector<int> feature_shape, int num_classes, int dim, int heads,
                       int patch, Rng& rng)
      : shape_(std::move(feature_shape)), classes_(num_classes), dim_(dim), heads_(heads),
        patch_(patch) {
    if (shape_.size() != 3) throw std::invalid_argument("velocity_attn: feature shape is [C,H,W]");
    if (shape_[1] % patch != 0 || shape_[2] % patch != 0)
      throw std::invalid_argument("velocity_attn: patch must divide feature height/width");
    gh_ = shape_[1] / patch;
    gw_ = shape_[2] / patch;
    tokens_ = gh_ * gw_;
    tok_dim_ = shape_[0] * patch * patch;
    in_proj_ = nn::Linear<T>(tok_dim_, dim, rng);
    out_proj_ = nn::Linear<T>(dim, tok_dim_, rng);
    label_emb_ = nn::Embedding<T>(num_classes, dim, rng);
    block1_ = nn::TransformerBlock<T>(dim, heads, 4, rng);
    block2_ = nn::TransformerBlock<T>(dim, heads, 4, rng);
    final_ln_ = nn::LayerNorm<T>(dim);
    pos_ = Tensor<T>({tokens_, dim});
    pos_grad_ = Tensor<T>::zeros_like(pos_);
    for (auto& v : pos_.data) v = static_cast<T>(rng.normal() * 0.02);
  }

  Tensor<T> forward(const Tensor<T>& z, const std::vector<T>& t,
                    const std::vector<int>& y) override {
    const int n = z.dim(0);
    auto tok = patchify(z);  // [n*tokens, tok_dim]
    auto x = in_proj_.forward(tok);
    auto cond = time_embedding(t, dim_);
    auto lab = label_emb_.forward(y);
    kern::vadd<T>(static_cast<int>(cond.numel()), cond.ptr(), lab.ptr(), cond.ptr());
    for (int b = 0; b < n; ++b)
      for (int s = 0; s < tokens_; ++s) {
        T* row = x.ptr() + (static_cast<long>(b) * tokens_ + s) * dim_;
        kern::axpy<T>(dim_, T(1), pos_.ptr() + static_cast<long>(s) * dim_, row);
        kern::axpy<T>(dim_, T(1), cond.ptr() + static_cast<long>(b) * dim_, row);
      }
    auto h = block2_.forward(block1_.forward(x.reshaped({n, tokens_, dim_})));
    auto hn = final_ln_.forward(h);
    auto out = out_proj_.forward(hn.reshaped({n * tokens_, dim_}));
    return unpatchify(out, n);
  }

  void backward(const Tensor<T>& dv) override {
    const int n = dv.dim(0);
    auto dtok = patchify(dv);  // same permutation applies to gradients
    auto dh = final_ln_.backward(
        out_proj_.backward(dtok).reshaped({n, tokens_, dim_}));
    auto dx = block1_.backward(block2_.backward(dh));
    Tensor<T> dcond({n, dim_});
    for (int b = 0; b < n; ++b)
      for (int s = 0; s < tokens_; ++s) {
        const T* row = dx.ptr() + (static_cast<long>(b) * tokens_ + s) * dim_;
        kern::axpy<T>(dim_, T(1), row, pos_grad_.ptr() + static_cast<long>(s) * dim_);
        kern::axpy<T>(dim_, T(1), row, dcond.ptr() + static_cast<long>(b) * dim_);
      }
    label_emb_.backward(dcond);
    in_proj_.backward(dx.reshaped({n * tokens_, dim_}));
  }

  ParamList<T> params() override {
    ParamList<T> ps;
    in_proj_.collect_params("in_proj", ps);
    ps.push_back({"pos", &pos_, &pos_grad_});
    label_emb_.collect_params("label_emb", ps);
    block1_.collect_params("block1", ps);
    block2_.collect_params("block2", ps);
    final_ln_.collect_params("final_ln", ps);
    out_proj_.collect_params("out_proj", ps);
    return ps;
  }

  std::string architecture_id() const override {
    std::ostringstream os;
    os << "velocity_attn/in" << shape_[0] << 'x' << shape_[1] << 'x' << shape_[2] << "/classes"
       << classes_ << "/dim" << dim_ << "/heads" << heads_ << "/patch" << patch_;
    return os.str();
  }

  std::unique_ptr<VelocityNet<T>> clone() const override {
    return std::make_unique<AttentionVelocityNet<T>>(*this);
  }
  std::vector<int> feature_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }

 private:
  // [N,C,H,W] -> [N*tokens, C*p*p], token-major (gy, gx), values (c, py, px)
  Tensor<T> patchify(const Tensor<T>& z) const {
    const int n = z.dim(0), c = shape_[0], h = shape_[1], w = shape_[2];
    Tensor<T> tok({n * tokens_, tok_dim_});
    for (int b = 0; b < n; ++b)
      for (int gy = 0; gy < gh_; ++gy)
        for (int gx = 0; gx < gw_; ++gx) {
          T* dst = tok.ptr() + (static_cast<long>(b) * tokens_ + gy * gw_ + gx) * tok_dim_;
          for (int ch = 0; ch < c; ++ch)
            for (int py = 0; py < patch_; ++py)
              for (int px = 0; px < patch_; ++px)
                *dst++ = z.ptr()[((static_cast<long>(b) * c + ch) * h + gy * patch_ + py) * w +
                                 gx * patch_ + px];
        }
    return tok;
  }

  Tensor<T> unpatchify(const Tensor<T>& tok, int n) const {
    const int c = shape_[0], h = shape_[1], w = shape_[2];
    Tensor<T> z({n, c, h, w});
    for (int b = 0; b < n; ++b)
      for (int gy = 0; gy < gh_; ++gy)
        for (int gx = 0; gx < gw_; ++gx) {
          const T* src = tok.ptr() + (static_cast<long>(b) * tokens_ + gy * gw_ + gx) * tok_dim_;
          for (int ch = 0; ch < c; ++ch)
            for (int py = 0; py < patch_; ++py)
              for (int px = 0; px < patch_; ++px)
                z.ptr()[((static_cast<long>(b) * c + ch) * h + gy * patch_ + py) * w +
                        gx * patch_ + px] = *src++;
        }
    return z;
  }

  std::vector<int> shape_;
  int classes_ = 0, dim_ = 0, heads_ = 0, patch_ = 0;
  int gh_ = 0, gw_ = 0, tokens_ = 0, tok_dim_ = 0;
  nn::Linear<T> in_proj_, out_proj_;
  nn::Embedding<T> label_emb_;
  nn::TransformerBlock<T> block1_, block2_;
  nn::LayerNorm<T> final_ln_;
  Tensor<T> pos_, pos_grad_;
};

// ---------------------------------------------------------------------------
// FeatureDecoder: transposed-conv stack mapping features back to [0,1] images
// of the original spatial shape.
// ---------------------------------------------------------------------------

template <class T>
class FeatureDecoder {
 public:
  FeatureDecoder() = default;
  FeatureDecoder(int channels, int hidden, Rng& rng)
      : channels_(channels), hidden_(hidden),
        up1_(channels, hidden, 3, 1, 1, rng),
        up2_(hidden, hidden, 3, 1, 1, rng),
        out_(hidden, channels, 3, 1, 1, rng) {}

  Tensor<T> forward(const Tensor<T>& feature) {
    auto h1 = a1_.forward(up1_.forward(feature));
    auto h2 = a2_.forward(up2_.forward(h1));
    return sig_.forward(out_.forward(h2));
  }

  Tensor<T> backward(const Tensor<T>& dimage) {
    auto d2 = up2_.backward(a2_.backward(out_.backward(sig_.backward(dimage))));
    return up1_.backward(a1_.backward(d2));
  }

  ParamList<T> params() {
    ParamList<T> ps;
    up1_.collect_params("up1", ps);
    up2_.collect_params("up2", ps);
    out_.collect_params("out", ps);
    return ps;
  }

  std::string architecture_id() const {
    return "decoder/c" + std::to_string(channels_) + "/hidden" + std::to_string(hidden_);
  }

 private:
  int channels_ = 0, hidden_ = 0;
  nn::ConvTranspose2d<T> up1_, up2_;
  nn::Conv2d<T> out_;
  nn::SiLU<T> a1_, a2_;
  nn::Sigmoid<T> sig_;
};

// ---------------------------------------------------------------------------
// Factories
// ---------------------------------------------------------------------------

/// Architecture hyperparameters for every role; the config module fills this
/// from the "nets" section of the experiment file.
struct NetsSpec {
  std::string classifier_arch = "small_cnn";  // small_cnn | resnet18
  int classifier_width = 8;
  int tap_layer = 3;
  std::string velocity_arch = "mlp";  // mlp | attention
  int velocity_hidden = 192;
  int velocity_embed = 64;
  int attention_dim = 48;
  int attention_heads = 4;
  int attention_patch = 2;
  int extractor_kernel = 3;
  int decoder_hidden = 16;
};

template <class T>
std::unique_ptr<Classifier<T>> make_classifier(const NetsSpec& spec, int in_ch, int in_h, int in_w,
                                               int num_classes, Rng& rng) {
  if (spec.classifier_arch == "small_cnn")
    return std::make_unique<SmallCnnClassifier<T>>(in_ch, in_h, in_w, num_classes,
                                                   spec.classifier_width, spec.tap_layer, rng);
  if (spec.classifier_arch == "resnet18")
    return std::make_unique<ResNetClassifier<T>>(in_ch, in_h, in_w, num_classes,
                                                 spec.classifier_width, spec.tap_layer, rng);
  throw std::invalid_argument("unknown classifier arch '" + spec.classifier_arch + "'");
}

template <class T>
std::unique_ptr<VelocityNet<T>> make_velocity_net(const NetsSpec& spec,
                                                  std::vector<int> feature_shape, int num_classes,
                                                  Rng& rng) {
  if (spec.velocity_arch == "mlp")
    return std::make_unique<MlpVelocityNet<T>>(std::move(feature_shape), num_classes,
                                               spec.velocity_hidden, spec.velocity_embed, rng);
  if (spec.velocity_arch == "attention")
    return std::make_unique<AttentionVelocityNet<T>>(std::move(feature_shape), num_classes,
                                                     spec.attention_dim, spec.attention_heads,
                                                     spec.attention_patch, rng);
  throw std::invalid_argument("unknown velocity arch '" + spec.velocity_arch + "'");
}

}  // namespace fgrf::nets
