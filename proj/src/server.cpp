// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include "fgrf/server.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fgrf/optim.hpp"

namespace fgrf::server {

SyntheticFeatureSet synthesize_dataset(const std::vector<client::ClientUpload>& uploads,
                                       int per_client, const flow::SamplerConfig& sampler,
                                       const nets::NetsSpec& spec,
                                       const std::vector<int>& feature_shape, int num_classes,
                                       client::GeneratorKind generator,
                                       const flow::DdpmConfig* ddpm) {
  if (uploads.empty()) throw std::invalid_argument("synthesize: need at least one upload");
  if (per_client < 1) throw std::invalid_argument("synthesize: per_client must be >= 1");
  sampler.validate();

  const int m = static_cast<int>(uploads.size()) * per_client;
  SyntheticFeatureSet out;
  out.num_classes = num_classes;
  out.features = TensorF({m, feature_shape[0], feature_shape[1], feature_shape[2]});
  out.labels.resize(static_cast<std::size_t>(m));
  out.source_client.resize(static_cast<std::size_t>(m));
  const long per = out.features.numel() / m;

  for (std::size_t k = 0; k < uploads.size(); ++k) {
    const auto& up = uploads[k];
    const double total = static_cast<double>(
        std::accumulate(up.label_histogram.begin(), up.label_histogram.end(), 0L));
    if (total <= 0) throw std::invalid_argument("synthesize: upload with zero-sum histogram");
    if (static_cast<int>(up.label_histogram.size()) != num_classes)
      throw std::invalid_argument("synthesize: histogram length mismatch");

    // labels ~ categorical(histogram / total)
    Rng label_rng(derive_seed(sampler.seed, "labels", static_cast<long>(k)));
    std::vector<int> labels(static_cast<std::size_t>(per_client));
    for (int i = 0; i < per_client; ++i) {
      double u = label_rng.uniform() * total;
      int cls = 0;
      for (std::size_t c = 0; c < up.label_histogram.size(); ++c) {
        u -= static_cast<double>(up.label_histogram[c]);
        if (u < 0) {
          cls = static_cast<int>(c);
          break;
        }
      }
      labels[static_cast<std::size_t>(i)] = cls;
    }

    Rng init(0);  // weights come from the upload; init values are irrelevant
    auto net = nets::make_velocity_net<float>(spec, feature_shape, num_classes, init);
    io::restore(up.flow_weights, net->architecture_id(), net->params(), {});

    flow::SamplerConfig per_client_cfg = sampler;
    per_client_cfg.seed = derive_seed(sampler.seed, "client", static_cast<long>(k));
    TensorF feats;
    if (generator == client::GeneratorKind::rfm) {
      feats = flow::sample_features_batch(*net, labels, per_client_cfg);
    } else {
      flow::DdpmConfig dcfg = ddpm ? *ddpm : flow::DdpmConfig{};
      dcfg.seed = per_client_cfg.seed;
      feats = flow::ddpm_sample_batch(*net, labels, dcfg, per_client_cfg.clamp_output);
    }

    const long base = static_cast<long>(k) * per_client;
    std::copy_n(feats.ptr(), feats.numel(), out.features.ptr() + base * per);
    for (int i = 0; i < per_client; ++i) {
      out.labels[static_cast<std::size_t>(base + i)] = labels[static_cast<std::size_t>(i)];
      out.source_client[static_cast<std::size_t>(base + i)] = static_cast<int>(k);
    }
  }
  return out;
}

TeacherEnsemble average_teachers(const std::vector<client::ClientUpload>& uploads, int tap_layer,
                                 bool size_weighted) {
  if (uploads.empty()) throw std::invalid_argument("average_teachers: no uploads");
  const auto& first = uploads[0].classifier_weights;
  for (const auto& up : uploads) {
    if (up.classifier_weights.architecture_id != first.architecture_id)
      throw std::invalid_argument("average_teachers: architecture mismatch ('" +
                                  up.classifier_weights.architecture_id + "' vs '" +
                                  first.architecture_id + "')");
    if (up.classifier_weights.entries.size() != first.entries.size())
      throw std::invalid_argument("average_teachers: entry table mismatch");
  }

  double total_sz = 0;
  std::vector<double> w(uploads.size(), 1.0 / static_cast<double>(uploads.size()));
  if (size_weighted) {
    for (const auto& up : uploads)
      total_sz += static_cast<double>(
          std::accumulate(up.label_histogram.begin(), up.label_histogram.end(), 0L));
    for (std::size_t k = 0; k < uploads.size(); ++k)
      w[k] = static_cast<double>(std::accumulate(uploads[k].label_histogram.begin(),
                                                 uploads[k].label_histogram.end(), 0L)) /
             total_sz;
  }

  TeacherEnsemble ens;
  ens.tap_layer = tap_layer;
  ens.weights = first;
  ens.weights.kind = "teacher_ensemble";
  for (std::size_t e = 0; e < ens.weights.entries.size(); ++e) {
    auto& acc = ens.weights.entries[e].data;
    std::vector<double> sum(acc.size(), 0.0);
    for (std::size_t k = 0; k < uploads.size(); ++k) {
      const auto& src = uploads[k].classifier_weights.entries[e];
      if (src.name != ens.weights.entries[e].name || src.shape != ens.weights.entries[e].shape)
        throw std::invalid_argument("average_teachers: entry mismatch at " + src.name);
      for (std::size_t i = 0; i < acc.size(); ++i)
        sum[i] += w[k] * static_cast<double>(src.data[i]);
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = static_cast<float>(sum[i]);
  }
  return ens;
}

std::unique_ptr<nets::Classifier<float>> materialize_teacher(const TeacherEnsemble& teacher,
                                                             const nets::NetsSpec& spec,
                                                             const std::vector<int>& feature_shape,
                                                             int num_classes) {
  Rng init(0);
  auto clf = nets::make_classifier<float>(spec, feature_shape[0], feature_shape[1],
                                          feature_shape[2], num_classes, init);
  clf->set_tap_layer(teacher.tap_layer);
  io::restore(teacher.weights, clf->architecture_id(), clf->params(), clf->buffers());
  return clf;
}

TrainGlobalResult train_global(const std::vector<client::ClientUpload>& uploads,
                               const SyntheticFeatureSet& d_syn, const DistillConfig& cfg,
                               const nets::NetsSpec& spec,
                               const std::function<double(nets::Classifier<float>&)>& evaluator) {
  cfg.validate();
  if (d_syn.size() < 1) throw std::invalid_argument("train_global: empty synthetic set");

  const std::vector<int> feature_shape = {d_syn.features.dim(1), d_syn.features.dim(2),
                                          d_syn.features.dim(3)};
  auto ens = average_teachers(uploads, cfg.tap_layer, cfg.size_weighted_teacher);
  auto teacher = materialize_teacher(ens, spec, feature_shape, d_syn.num_classes);

  nets::NetsSpec student_spec = spec;
  student_spec.tap_layer = cfg.tap_layer;
  Rng init(derive_seed(cfg.init_seed, "init/student"));
  TrainGlobalResult res;
  res.student = nets::make_classifier<float>(student_spec, feature_shape[0], feature_shape[1],
                                             feature_shape[2], d_syn.num_classes, init);

  nn::Optimizer<float> opt(res.student->params(), nn::optimizer_from_string(cfg.optimizer),
                           static_cast<float>(cfg.learning_rate));
  Rng order(derive_seed(cfg.seed, "distill/order"));
  const int n = d_syn.size();
  const long per = d_syn.features.numel() / n;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);

  for (int e = 0; e < cfg.epochs; ++e) {
    order.shuffle(idx);
    double ce = 0, kl = 0, feat = 0, total = 0;
    int batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      TensorF z({bs, feature_shape[0], feature_shape[1], feature_shape[2]});
      std::vector<int> y(static_cast<std::size_t>(bs));
      for (int b = 0; b < bs; ++b) {
        const int s = idx[static_cast<std::size_t>(start + b)];
        std::copy_n(d_syn.features.ptr() + s * per, per, z.ptr() + b * per);
        y[static_cast<std::size_t>(b)] = d_syn.labels[static_cast<std::size_t>(s)];
      }
      auto parts = dlkd_total_loss<float>(*res.student, *teacher, z, y, cfg, true, true);
      opt.step();
      ce += parts.ce;
      kl += parts.kl;
      feat += parts.feat;
      total += parts.total;
      ++batches;
    }
    DistillEpochLog row;
    row.epoch = e;
    row.ce = batches ? ce / batches : 0.0;
    row.kl = batches ? kl / batches : 0.0;
    row.feat = batches ? feat / batches : 0.0;
    row.total = batches ? total / batches : 0.0;
    row.eval_acc = evaluator ? evaluator(*res.student) : std::nan("");
    res.log.push_back(row);
  }
  return res;
}

}  // namespace fgrf::server
