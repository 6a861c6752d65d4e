// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// One client's single-round work: train the feature extractor through an
// auxiliary classifier, train the teacher classifier on cached features,
// train the generative flow on the same features, and emit the upload.
// The upload carries classifier and flow weights plus the label histogram —
// never images, features, or the extractor.
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fgrf/checkpoint.hpp"
#include "fgrf/data.hpp"
#include "fgrf/flow.hpp"
#include "fgrf/nets.hpp"

namespace fgrf::client {

enum class GeneratorKind { rfm, ddpm };

inline GeneratorKind generator_from_string(const std::string& s) {
  if (s == "rfm") return GeneratorKind::rfm;
  if (s == "ddpm") return GeneratorKind::ddpm;
  throw std::invalid_argument("unknown generator '" + s + "' (expected rfm|ddpm)");
}

struct ClientTrainConfig {
  int extractor_epochs = 4;
  int classifier_epochs = 8;
  int flow_epochs = 40;
  int batch_size = 32;
  double learning_rate = 0.05;       // eta_client, extractor + classifiers
  double flow_learning_rate = 2e-3;  // flow objective usually wants a smaller step
  std::string optimizer = "sgd";
  std::string flow_optimizer = "sgd";
  GeneratorKind generator = GeneratorKind::rfm;
  flow::DdpmConfig ddpm;  // used when generator == ddpm
  std::uint64_t seed = 0;
  std::uint64_t init_seed = 0;  // weight init; shared across clients by default

  void validate() const {
    if (extractor_epochs < 0 || classifier_epochs < 0 || flow_epochs < 0)
      throw std::invalid_argument("client: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("client: batch_size must be >= 1");
    if (learning_rate <= 0 || flow_learning_rate <= 0)
      throw std::invalid_argument("client: learning rates must be > 0");
  }
};

struct ClientUpload {
  int client_id = 0;
  io::Checkpoint classifier_weights;  // teacher c_gamma_k
  io::Checkpoint flow_weights;        // g_phi_k
  std::vector<long> label_histogram;
};

void save_client_upload(const std::string& path, const ClientUpload& upload);
ClientUpload load_client_upload(const std::string& path);
std::vector<std::uint8_t> serialize_client_upload(const ClientUpload& upload);

struct ExtractorTrainResult {
  nets::FeatureExtractor<float> extractor;
  std::unique_ptr<nets::Classifier<float>> classifier;  // the auxiliary head
  std::vector<double> epoch_losses;
};

/// Joint end-to-end cross-entropy training of extractor + auxiliary
/// classifier on the client's raw images.
ExtractorTrainResult train_extractor(const data::ClientDataset& dataset,
                                     const ClientTrainConfig& cfg, const nets::NetsSpec& spec);

struct ClassifierTrainResult {
  std::unique_ptr<nets::Classifier<float>> classifier;
  std::vector<double> epoch_losses;
};

/// Teacher training on extracted features (extractor already frozen).
ClassifierTrainResult train_client_classifier(const TensorF& features,
                                              const std::vector<int>& labels, int num_classes,
                                              const ClientTrainConfig& cfg,
                                              const nets::NetsSpec& spec);

struct FlowTrainResult {
  std::unique_ptr<nets::VelocityNet<float>> net;
  std::vector<double> epoch_losses;
};

FlowTrainResult train_client_flow(const TensorF& features, const std::vector<int>& labels,
                                  int num_classes, const ClientTrainConfig& cfg,
                                  const nets::NetsSpec& spec);

/// Map raw images in [0,1] to [-1,1]; the feature-space stand-in when the
/// extractor is ablated away.
TensorF rescale_to_feature_range(const TensorF& images);

struct ClientRunResult {
  ClientUpload upload;
  nets::FeatureExtractor<float> extractor;  // retained locally, never uploaded
  bool has_extractor = false;
  std::vector<double> extractor_losses, classifier_losses, flow_losses;
};

/// Full Step-1 composition. When use_extractor is false, rescaled raw pixels
/// stand in for features (the "w/o feature extractor" ablation).
ClientRunResult run_client(const data::ClientDataset& dataset, const ClientTrainConfig& cfg,
                           const nets::NetsSpec& spec, bool use_extractor = true);

}  // namespace fgrf::client
