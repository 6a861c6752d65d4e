// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Memorization evaluation: dimension-normalized L2 nearest-neighbor
// distances between generated and training images, threshold flagging, and
// the pixel-pipeline vs decoded-feature-pipeline comparison. All distances
// are computed at float64.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgrf/tensor.hpp"

namespace fgrf::privacy {

struct PrivacyConfig {
  double delta = 0.1;  // memorization threshold on normalized L2
  int num_generated = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (delta <= 0) throw std::invalid_argument("privacy: delta must be > 0");
    if (num_generated < 1) throw std::invalid_argument("privacy: num_generated must be >= 1");
  }
};

struct MemorizationReport {
  std::vector<double> per_generated_min_distance;
  int num_flagged = 0;
  double mean_nn_distance = 0.0;
  std::string mode;  // "pixel" or "feature-decoded"
};

/// sqrt( sum_i (a_i - b_i)^2 / d ), d = element count.
double l2_distance(const TensorF& a, const TensorF& b);
double l2_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Per generated image: min normalized L2 over the training set; flagged
/// when <= delta.
MemorizationReport memorization_report(const TensorF& generated_images,
                                       const TensorF& train_images, const PrivacyConfig& cfg,
                                       const std::string& mode = "pixel");

struct PipelineComparison {
  MemorizationReport pixel;
  MemorizationReport feature;
  bool direction_ok = false;  // feature mean NN distance >= pixel mean NN distance
};

PipelineComparison compare_pipelines(const TensorF& pixel_samples,
                                     const TensorF& decoded_feature_samples,
                                     const TensorF& train_images, const PrivacyConfig& cfg);

void write_privacy_report(const std::string& path, const PipelineComparison& cmp,
                          const PrivacyConfig& cfg);

}  // namespace fgrf::privacy
