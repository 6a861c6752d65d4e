// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include "fgrf/client.hpp"

#include <algorithm>
#include <numeric>

#include "fgrf/losses.hpp"
#include "fgrf/optim.hpp"

namespace fgrf::client {

namespace {

// shared minibatch loop for classifier-style training; returns mean epoch losses
template <class StepFn>
std::vector<double> epoch_loop(int n, int epochs, int batch_size, Rng& order_rng, StepFn step) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> losses;
  for (int e = 0; e < epochs; ++e) {
    order_rng.shuffle(idx);
    double total = 0;
    int batches = 0;
    for (int start = 0; start < n; start += batch_size) {
      const int bs = std::min(batch_size, n - start);
      total += step(idx, start, bs);
      ++batches;
    }
    losses.push_back(batches ? total / batches : 0.0);
  }
  return losses;
}

void gather_batch(const TensorF& src, const std::vector<int>& labels, const std::vector<int>& idx,
                  int start, int bs, TensorF& x, std::vector<int>& y) {
  const long per = src.numel() / src.dim(0);
  x = TensorF({bs, src.dim(1), src.dim(2), src.dim(3)});
  y.resize(static_cast<std::size_t>(bs));
  for (int b = 0; b < bs; ++b) {
    const int s = idx[static_cast<std::size_t>(start + b)];
    std::copy_n(src.ptr() + s * per, per, x.ptr() + b * per);
    y[static_cast<std::size_t>(b)] = labels[static_cast<std::size_t>(s)];
  }
}

}  // namespace

TensorF rescale_to_feature_range(const TensorF& images) {
  TensorF out(images.shape);
  for (long i = 0; i < images.numel(); ++i) out[i] = 2.0f * images[i] - 1.0f;
  return out;
}

ExtractorTrainResult train_extractor(const data::ClientDataset& dataset,
                                     const ClientTrainConfig& cfg, const nets::NetsSpec& spec) {
  cfg.validate();
  if (dataset.data.size() < 1) throw std::invalid_argument("train_extractor: empty dataset");
  const auto& set = dataset.data;

  Rng ext_init(derive_seed(cfg.init_seed, "init/extractor"));
  Rng clf_init(derive_seed(cfg.init_seed, "init/extractor_classifier"));
  ExtractorTrainResult res{
      nets::FeatureExtractor<float>(set.channels(), spec.extractor_kernel, ext_init),
      nets::make_classifier<float>(spec, set.channels(), set.height(), set.width(),
                                   set.num_classes, clf_init),
      {}};

  if (cfg.extractor_epochs == 0) return res;

  nn::ParamList<float> joint = res.extractor.params();
  for (auto& p : res.classifier->params()) joint.push_back(p);
  nn::Optimizer<float> opt(joint, nn::optimizer_from_string(cfg.optimizer),
                           static_cast<float>(cfg.learning_rate));
  Rng order(derive_seed(cfg.seed, "extractor/order"));

  res.epoch_losses = epoch_loop(
      set.size(), cfg.extractor_epochs, cfg.batch_size, order,
      [&](const std::vector<int>& idx, int start, int bs) {
        TensorF x;
        std::vector<int> y;
        gather_batch(set.images, set.labels, idx, start, bs, x, y);
        auto feat = res.extractor.forward(x);
        auto out = res.classifier->forward(feat, true);
        auto ce = nn::softmax_cross_entropy(out.logits, y);
        auto dfeat = res.classifier->backward(ce.grad, nullptr);
        res.extractor.backward(dfeat);
        opt.step();
        return static_cast<double>(ce.value);
      });
  return res;
}

ClassifierTrainResult train_client_classifier(const TensorF& features,
                                              const std::vector<int>& labels, int num_classes,
                                              const ClientTrainConfig& cfg,
                                              const nets::NetsSpec& spec) {
  cfg.validate();
  if (features.rank() != 4 || features.dim(0) < 1)
    throw std::invalid_argument("train_client_classifier: empty feature list");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw std::out_of_range("train_client_classifier: label out of range");

  Rng init(derive_seed(cfg.init_seed, "init/classifier"));
  ClassifierTrainResult res{nets::make_classifier<float>(spec, features.dim(1), features.dim(2),
                                                         features.dim(3), num_classes, init),
                            {}};
  if (cfg.classifier_epochs == 0) return res;

  nn::Optimizer<float> opt(res.classifier->params(), nn::optimizer_from_string(cfg.optimizer),
                           static_cast<float>(cfg.learning_rate));
  Rng order(derive_seed(cfg.seed, "classifier/order"));
  res.epoch_losses = epoch_loop(
      features.dim(0), cfg.classifier_epochs, cfg.batch_size, order,
      [&](const std::vector<int>& idx, int start, int bs) {
        TensorF x;
        std::vector<int> y;
        gather_batch(features, labels, idx, start, bs, x, y);
        auto out = res.classifier->forward(x, true);
        auto ce = nn::softmax_cross_entropy(out.logits, y);
        res.classifier->backward(ce.grad, nullptr);
        opt.step();
        return static_cast<double>(ce.value);
      });
  return res;
}

FlowTrainResult train_client_flow(const TensorF& features, const std::vector<int>& labels,
                                  int num_classes, const ClientTrainConfig& cfg,
                                  const nets::NetsSpec& spec) {
  cfg.validate();
  if (features.rank() != 4 || features.dim(0) < 1)
    throw std::invalid_argument("train_client_flow: empty feature list");

  Rng init(derive_seed(cfg.init_seed, "init/flow"));
  FlowTrainResult res{
      nets::make_velocity_net<float>(spec, {features.dim(1), features.dim(2), features.dim(3)},
                                     num_classes, init),
      {}};
  flow::FlowTrainConfig fc;
  fc.epochs = cfg.flow_epochs;
  fc.batch_size = cfg.batch_size;
  fc.learning_rate = cfg.flow_learning_rate;
  fc.optimizer = cfg.flow_optimizer;
  fc.seed = derive_seed(cfg.seed, "flow");
  const auto curve = cfg.generator == GeneratorKind::rfm
                         ? flow::train_rfm(*res.net, features, labels, fc)
                         : flow::train_ddpm(*res.net, features, labels, fc, cfg.ddpm);
  res.epoch_losses = curve.epoch_losses;
  return res;
}

ClientRunResult run_client(const data::ClientDataset& dataset, const ClientTrainConfig& cfg,
                           const nets::NetsSpec& spec, bool use_extractor) {
  cfg.validate();
  const auto& set = dataset.data;
  if (set.size() < 1) throw std::invalid_argument("run_client: empty dataset");

  ClientRunResult res;
  TensorF features;
  if (use_extractor) {
    auto ext = train_extractor(dataset, cfg, spec);
    res.extractor = ext.extractor;
    res.has_extractor = true;
    res.extractor_losses = ext.epoch_losses;
    features = res.extractor.forward(set.images);  // computed once, cached
  } else {
    features = rescale_to_feature_range(set.images);
  }

  auto teacher = train_client_classifier(features, set.labels, set.num_classes, cfg, spec);
  res.classifier_losses = teacher.epoch_losses;
  auto flow_net = train_client_flow(features, set.labels, set.num_classes, cfg, spec);
  res.flow_losses = flow_net.epoch_losses;

  res.upload.client_id = dataset.client_id;
  res.upload.label_histogram = dataset.label_histogram;
  res.upload.classifier_weights =
      io::snapshot("classifier", teacher.classifier->architecture_id(),
                   teacher.classifier->params(), teacher.classifier->buffers(), cfg.seed,
                   cfg.classifier_epochs);
  res.upload.flow_weights = io::snapshot("flow", flow_net.net->architecture_id(),
                                         flow_net.net->params(), {}, cfg.seed, cfg.flow_epochs);
  return res;
}

// ---------------------------------------------------------------------------
// Upload wire format: one container per client per run.
// ---------------------------------------------------------------------------

namespace {

io::Checkpoint upload_to_checkpoint(const ClientUpload& upload) {
  io::Checkpoint ckpt;
  ckpt.kind = "client_upload";
  ckpt.architecture_id = "client_upload/v1";
  ckpt.seed = upload.classifier_weights.seed;
  ckpt.extra["client_id"] = upload.client_id;
  ckpt.extra["label_histogram"] = upload.label_histogram;
  ckpt.extra["classifier_architecture"] = upload.classifier_weights.architecture_id;
  ckpt.extra["flow_architecture"] = upload.flow_weights.architecture_id;
  for (const auto& e : upload.classifier_weights.entries)
    ckpt.add("classifier/" + e.name, e.shape, e.data);
  for (const auto& e : upload.flow_weights.entries) ckpt.add("flow/" + e.name, e.shape, e.data);
  return ckpt;
}

ClientUpload checkpoint_to_upload(const io::Checkpoint& ckpt) {
  if (ckpt.kind != "client_upload") throw std::runtime_error("not a client upload checkpoint");
  ClientUpload upload;
  upload.client_id = ckpt.extra.at("client_id").get<int>();
  upload.label_histogram = ckpt.extra.at("label_histogram").get<std::vector<long>>();
  upload.classifier_weights.kind = "classifier";
  upload.classifier_weights.architecture_id =
      ckpt.extra.at("classifier_architecture").get<std::string>();
  upload.classifier_weights.seed = ckpt.seed;
  upload.flow_weights.kind = "flow";
  upload.flow_weights.architecture_id = ckpt.extra.at("flow_architecture").get<std::string>();
  upload.flow_weights.seed = ckpt.seed;
  for (const auto& e : ckpt.entries) {
    if (e.name.rfind("classifier/", 0) == 0)
      upload.classifier_weights.add(e.name.substr(11), e.shape, e.data);
    else if (e.name.rfind("flow/", 0) == 0)
      upload.flow_weights.add(e.name.substr(5), e.shape, e.data);
    else
      throw std::runtime_error("client upload: unexpected entry " + e.name);
  }
  return upload;
}

}  // namespace

void save_client_upload(const std::string& path, const ClientUpload& upload) {
  io::save_checkpoint(path, upload_to_checkpoint(upload));
}

ClientUpload load_client_upload(const std::string& path) {
  return checkpoint_to_upload(io::load_checkpoint(path));
}

std::vector<std::uint8_t> serialize_client_upload(const ClientUpload& upload) {
  return io::serialize_checkpoint(upload_to_checkpoint(upload));
}

}  // namespace fgrf::client
