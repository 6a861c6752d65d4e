// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include "fgrf/fedavg.hpp"

#include <algorithm>
#include <numeric>

#include "fgrf/losses.hpp"
#include "fgrf/optim.hpp"

namespace fgrf::fed {

namespace {

std::unique_ptr<nets::Classifier<float>> make_model(const nets::NetsSpec& spec,
                                                    const data::LabeledImageSet& like,
                                                    std::uint64_t init_seed) {
  Rng init(derive_seed(init_seed, "init/fedavg"));
  return nets::make_classifier<float>(spec, like.channels(), like.height(), like.width(),
                                      like.num_classes, init);
}

void train_local(nets::Classifier<float>& clf, const data::LabeledImageSet& set, int epochs,
                 const FedAvgConfig& cfg, std::uint64_t order_seed) {
  if (epochs == 0 || set.size() == 0) return;
  nn::Optimizer<float> opt(clf.params(), nn::optimizer_from_string(cfg.optimizer),
                           static_cast<float>(cfg.learning_rate));
  Rng order(order_seed);
  const int n = set.size();
  const long per = set.images.numel() / n;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int e = 0; e < epochs; ++e) {
    order.shuffle(idx);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      TensorF x({bs, set.channels(), set.height(), set.width()});
      std::vector<int> y(static_cast<std::size_t>(bs));
      for (int b = 0; b < bs; ++b) {
        const int s = idx[static_cast<std::size_t>(start + b)];
        std::copy_n(set.images.ptr() + s * per, per, x.ptr() + b * per);
        y[static_cast<std::size_t>(b)] = set.labels[static_cast<std::size_t>(s)];
      }
      auto out = clf.forward(x, true);
      auto ce = nn::softmax_cross_entropy(out.logits, y);
      clf.backward(ce.grad, nullptr);
      opt.step();
    }
  }
}

}  // namespace

double evaluate_classifier(nets::Classifier<float>& clf, const data::LabeledImageSet& set,
                           int batch_size) {
  if (set.size() == 0) return 0.0;
  const int n = set.size();
  const long per = set.images.numel() / n;
  int correct = 0;
  for (int start = 0; start < n; start += batch_size) {
    const int bs = std::min(batch_size, n - start);
    TensorF x({bs, set.channels(), set.height(), set.width()});
    std::vector<int> y(static_cast<std::size_t>(bs));
    for (int b = 0; b < bs; ++b) {
      std::copy_n(set.images.ptr() + (start + b) * per, per, x.ptr() + b * per);
      y[static_cast<std::size_t>(b)] = set.labels[static_cast<std::size_t>(start + b)];
    }
    auto out = clf.forward(x, false);
    const int k = out.logits.dim(1);
    for (int b = 0; b < bs; ++b) {
      int arg = 0;
      for (int j = 1; j < k; ++j)
        if (out.logits.at2(b, j) > out.logits.at2(b, arg)) arg = j;
      if (arg == y[static_cast<std::size_t>(b)]) ++correct;
    }
  }
  return static_cast<double>(correct) / n;
}

io::Checkpoint fedavg_round(const io::Checkpoint& global_weights,
                            const std::vector<data::ClientDataset>& clients,
                            const FedAvgConfig& cfg, const nets::NetsSpec& spec,
                            int round_index) {
  cfg.validate();
  if (clients.empty()) throw std::invalid_argument("fedavg_round: empty client list");

  long total = 0;
  for (const auto& c : clients) total += c.data.size();
  if (total == 0) throw std::invalid_argument("fedavg_round: no samples");

  io::Checkpoint agg = global_weights;
  std::vector<std::vector<double>> sums(agg.entries.size());
  for (std::size_t e = 0; e < agg.entries.size(); ++e)
    sums[e].assign(agg.entries[e].data.size(), 0.0);

  for (const auto& cds : clients) {
    auto model = make_model(spec, cds.data, cfg.init_seed);
    io::restore(global_weights, model->architecture_id(), model->params(), model->buffers());
    train_local(*model, cds.data, cfg.local_epochs, cfg,
                derive_seed(cfg.seed, "fedavg/round/" + std::to_string(round_index) + "/client",
                            cds.client_id));
    auto snap = io::snapshot("classifier", model->architecture_id(), model->params(),
                             model->buffers(), cfg.seed, round_index);
    const double w = static_cast<double>(cds.data.size()) / static_cast<double>(total);
    for (std::size_t e = 0; e < snap.entries.size(); ++e)
      for (std::size_t i = 0; i < snap.entries[e].data.size(); ++i)
        sums[e][i] += w * static_cast<double>(snap.entries[e].data[i]);
  }
  for (std::size_t e = 0; e < agg.entries.size(); ++e)
    for (std::size_t i = 0; i < agg.entries[e].data.size(); ++i)
      agg.entries[e].data[i] = static_cast<float>(sums[e][i]);
  agg.creation_step = round_index + 1;
  return agg;
}

FedAvgResult run_fedavg(const std::vector<data::ClientDataset>& clients,
                        const data::LabeledImageSet& test_set, const FedAvgConfig& cfg,
                        const nets::NetsSpec& spec) {
  cfg.validate();
  if (clients.empty()) throw std::invalid_argument("run_fedavg: empty client list");

  FedAvgResult res;
  res.model = make_model(spec, clients[0].data, cfg.init_seed);
  auto global = io::snapshot("classifier", res.model->architecture_id(), res.model->params(),
                             res.model->buffers(), cfg.seed, 0);
  for (int r = 0; r < cfg.rounds; ++r) {
    global = fedavg_round(global, clients, cfg, spec, r);
    io::restore(global, res.model->architecture_id(), res.model->params(), res.model->buffers());
    res.accuracy_curve.push_back(evaluate_classifier(*res.model, test_set));
  }
  return res;
}

FedAvgResult train_centralized(const data::LabeledImageSet& train_set,
                               const data::LabeledImageSet& test_set, int epochs,
                               const FedAvgConfig& cfg, const nets::NetsSpec& spec) {
  FedAvgResult res;
  res.model = make_model(spec, train_set, cfg.init_seed);
  for (int e = 0; e < epochs; ++e) {
    train_local(*res.model, train_set, 1, cfg, derive_seed(cfg.seed, "centralized/epoch", e));
    res.accuracy_curve.push_back(evaluate_classifier(*res.model, test_set));
  }
  return res;
}

}  // namespace fgrf::fed
