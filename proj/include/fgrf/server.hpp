// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Server side of the single round: synthesize the global feature set from
// uploaded flows, parameter-average the teachers, and distill the student
// with the dual-layer objective (temperature KL on logits + mean-square
// alignment of the tapped intermediate features).
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fgrf/client.hpp"
#include "fgrf/flow.hpp"
#include "fgrf/losses.hpp"
#include "fgrf/nets.hpp"

namespace fgrf::server {

struct SyntheticFeatureSet {
  TensorF features;                 // [M, C, H', W'] in [-1, 1]
  std::vector<int> labels;          // [M]
  std::vector<int> source_client;   // [M], index into the uploads
  int num_classes = 0;

  int size() const { return features.rank() ? features.dim(0) : 0; }
};

struct TeacherEnsemble {
  io::Checkpoint weights;  // parameter-wise mean of the client classifiers
  int tap_layer = 3;
};

struct DistillConfig {
  double alpha = 0.5;        // KL weight in [0,1]
  double beta = 0.1;         // feature-alignment weight >= 0
  double temperature = 3.0;  // softmax temperature > 0
  int tap_layer = 3;
  int epochs = 8;
  int batch_size = 32;
  double learning_rate = 0.05;  // eta_server
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;
  bool kl_t2_scaling = true;  // multiply the KL term by T^2 (gradient-scale fix)
  std::string optimizer = "sgd";
  bool size_weighted_teacher = false;  // Eq. 8 is unweighted; variant for comparison

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("distill: alpha in [0,1]");
    if (beta < 0.0) throw std::invalid_argument("distill: beta >= 0");
    if (temperature <= 0.0) throw std::invalid_argument("distill: temperature > 0");
    if (epochs < 0) throw std::invalid_argument("distill: epochs >= 0");
    if (batch_size < 1) throw std::invalid_argument("distill: batch_size >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("distill: learning_rate > 0");
  }
};

/// For each upload: draw per_client labels from its normalized histogram,
/// run that client's flow, tag provenance. Label and noise streams derive
/// from sampler.seed and the client index.
SyntheticFeatureSet synthesize_dataset(const std::vector<client::ClientUpload>& uploads,
                                       int per_client, const flow::SamplerConfig& sampler,
                                       const nets::NetsSpec& spec,
                                       const std::vector<int>& feature_shape, int num_classes,
                                       client::GeneratorKind generator = client::GeneratorKind::rfm,
                                       const flow::DdpmConfig* ddpm = nullptr);

/// Unweighted parameter mean of the uploaded classifiers (all buffers
/// averaged alongside). Throws if the architecture ids disagree.
TeacherEnsemble average_teachers(const std::vector<client::ClientUpload>& uploads, int tap_layer,
                                 bool size_weighted = false);

std::unique_ptr<nets::Classifier<float>> materialize_teacher(const TeacherEnsemble& teacher,
                                                             const nets::NetsSpec& spec,
                                                             const std::vector<int>& feature_shape,
                                                             int num_classes);

/// D_KL( softmax(teacher/T) || softmax(student/T) ), mean over the batch.
template <class T>
T kl_logit_loss(const Tensor<T>& student_logits, const Tensor<T>& teacher_logits, T temperature) {
  return nn::kl_divergence(teacher_logits, student_logits, temperature).value;
}

/// Mean squared error between tap maps.
template <class T>
T feature_align_loss(const Tensor<T>& student_tap, const Tensor<T>& teacher_tap) {
  return nn::mse(student_tap, teacher_tap).value;
}

template <class T>
struct DlkdLossParts {
  T total, ce, kl, feat;
};

/// total = (1-alpha) * CE + alpha * KL + beta * feat, all components computed
/// against the teacher's logits/tap on the same batch. The reported kl
/// already carries the optional T^2 scaling, so the identity holds exactly
/// for every flag setting. Teachers are evaluated without gradients.
template <class T>
DlkdLossParts<T> dlkd_total_loss(nets::Classifier<T>& student, nets::Classifier<T>& teacher,
                                 const Tensor<T>& batch_z, const std::vector<int>& batch_y,
                                 const DistillConfig& cfg, bool accumulate_grads = false,
                                 bool train_mode = false) {
  cfg.validate();
  auto t_out = teacher.forward(batch_z, false);
  auto s_out = student.forward(batch_z, train_mode);

  auto ce = nn::softmax_cross_entropy(s_out.logits, batch_y);
  auto kl = nn::kl_divergence(t_out.logits, s_out.logits, static_cast<T>(cfg.temperature));
  auto feat = nn::mse(s_out.tap, t_out.tap);

  const T t2 = cfg.kl_t2_scaling
                   ? static_cast<T>(cfg.temperature) * static_cast<T>(cfg.temperature)
                   : T(1);
  const T alpha = static_cast<T>(cfg.alpha), beta = static_cast<T>(cfg.beta);
  DlkdLossParts<T> parts;
  parts.ce = ce.value;
  parts.kl = kl.value * t2;
  parts.feat = feat.value;
  parts.total = (T(1) - alpha) * parts.ce + alpha * parts.kl + beta * parts.feat;

  if (accumulate_grads) {
    Tensor<T> dlogits(ce.grad.shape);
    for (long i = 0; i < dlogits.numel(); ++i)
      dlogits[i] = (T(1) - alpha) * ce.grad[i] + alpha * t2 * kl.grad[i];
    if (beta > T(0)) {
      Tensor<T> dtap(feat.grad.shape);
      for (long i = 0; i < dtap.numel(); ++i) dtap[i] = beta * feat.grad[i];
      student.backward(dlogits, &dtap);
    } else {
      student.backward(dlogits, nullptr);
    }
  }
  return parts;
}

struct DistillEpochLog {
  int epoch;
  double ce, kl, feat, total;
  double eval_acc;  // NaN when no evaluator is attached
};

struct TrainGlobalResult {
  std::unique_ptr<nets::Classifier<float>> student;
  std::vector<DistillEpochLog> log;
};

/// Builds the teacher ensemble from the uploads, then minimizes the DLKD
/// objective over the synthetic set. An optional evaluator is invoked after
/// every epoch (the experiment layer passes pooled test accuracy).
TrainGlobalResult train_global(
    const std::vector<client::ClientUpload>& uploads, const SyntheticFeatureSet& d_syn,
    const DistillConfig& cfg, const nets::NetsSpec& spec,
    const std::function<double(nets::Classifier<float>&)>& evaluator = nullptr);

}  // namespace fgrf::server
