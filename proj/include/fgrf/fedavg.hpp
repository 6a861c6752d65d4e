// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-round FedAvg baseline on raw pixels, plus centralized training as
// the comparison upper bound. Aggregation is the dataset-size-weighted
// parameter mean.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fgrf/checkpoint.hpp"
#include "fgrf/data.hpp"
#include "fgrf/nets.hpp"

namespace fgrf::fed {

struct FedAvgConfig {
  int rounds = 20;
  int local_epochs = 1;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::string optimizer = "sgd";
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;

  void validate() const {
    if (rounds < 1) throw std::invalid_argument("fedavg: rounds must be >= 1");
    if (local_epochs < 0) throw std::invalid_argument("fedavg: local_epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("fedavg: batch_size must be >= 1");
    if (learning_rate <= 0) throw std::invalid_argument("fedavg: learning_rate must be > 0");
  }
};

/// One communication round: every client copies the global weights, trains
/// locally, and the server replaces the global model with the size-weighted
/// mean. `round_index` salts the per-client shuffling streams.
io::Checkpoint fedavg_round(const io::Checkpoint& global_weights,
                            const std::vector<data::ClientDataset>& clients,
                            const FedAvgConfig& cfg, const nets::NetsSpec& spec,
                            int round_index = 0);

struct FedAvgResult {
  std::unique_ptr<nets::Classifier<float>> model;
  std::vector<double> accuracy_curve;  // pooled test accuracy per round
};

FedAvgResult run_fedavg(const std::vector<data::ClientDataset>& clients,
                        const data::LabeledImageSet& test_set, const FedAvgConfig& cfg,
                        const nets::NetsSpec& spec);

/// Same trainer on the pooled data: the centralized upper bound.
FedAvgResult train_centralized(const data::LabeledImageSet& train_set,
                               const data::LabeledImageSet& test_set, int epochs,
                               const FedAvgConfig& cfg, const nets::NetsSpec& spec);

/// Accuracy of a pixel-space classifier on an image set (eval mode).
double evaluate_classifier(nets::Classifier<float>& clf, const data::LabeledImageSet& set,
                           int batch_size = 64);

}  // namespace fgrf::fed
