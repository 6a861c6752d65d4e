// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include "fgrf/privacy.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fgrf::privacy {

double l2_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("l2_distance: shape mismatch");
  if (a.empty()) throw std::invalid_argument("l2_distance: empty input");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double l2_distance(const TensorF& a, const TensorF& b) {
  check_same_shape(a.shape, b.shape, "l2_distance");
  if (a.numel() == 0) throw std::invalid_argument("l2_distance: empty input");
  double acc = 0;
  for (long i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.numel()));
}

MemorizationReport memorization_report(const TensorF& generated_images,
                                       const TensorF& train_images, const PrivacyConfig& cfg,
                                       const std::string& mode) {
  cfg.validate();
  if (generated_images.rank() != 4 || train_images.rank() != 4 ||
      generated_images.dim(0) == 0 || train_images.dim(0) == 0)
    throw std::invalid_argument("memorization_report: empty image sets");
  if (std::vector<int>(generated_images.shape.begin() + 1, generated_images.shape.end()) !=
      std::vector<int>(train_images.shape.begin() + 1, train_images.shape.end()))
    throw std::invalid_argument("memorization_report: image shapes differ");

  const int g = generated_images.dim(0), n = train_images.dim(0);
  const long per = generated_images.numel() / g;

  MemorizationReport rep;
  rep.mode = mode;
  rep.per_generated_min_distance.reserve(static_cast<std::size_t>(g));
  double total = 0;
  for (int i = 0; i < g; ++i) {
    const float* gp = generated_images.ptr() + i * per;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      const float* tp = train_images.ptr() + j * per;
      double acc = 0;
      for (long e = 0; e < per; ++e) {
        const double d = static_cast<double>(gp[e]) - static_cast<double>(tp[e]);
        acc += d * d;
      }
      const double dist = std::sqrt(acc / static_cast<double>(per));
      if (dist < best) best = dist;
    }
    rep.per_generated_min_distance.push_back(best);
    if (best <= cfg.delta) ++rep.num_flagged;
    total += best;
  }
  rep.mean_nn_distance = total / g;
  return rep;
}

PipelineComparison compare_pipelines(const TensorF& pixel_samples,
                                     const TensorF& decoded_feature_samples,
                                     const TensorF& train_images, const PrivacyConfig& cfg) {
  PipelineComparison cmp;
  cmp.pixel = memorization_report(pixel_samples, train_images, cfg, "pixel");
  cmp.feature = memorization_report(decoded_feature_samples, train_images, cfg, "feature-decoded");
  cmp.direction_ok = cmp.feature.mean_nn_distance >= cmp.pixel.mean_nn_distance;
  return cmp;
}

void write_privacy_report(const std::string& path, const PipelineComparison& cmp,
                          const PrivacyConfig& cfg) {
  nlohmann::json j;
  j["delta"] = cfg.delta;
  for (const auto* rep : {&cmp.pixel, &cmp.feature}) {
    nlohmann::json r;
    r["mode"] = rep->mode;
    r["num_flagged"] = rep->num_flagged;
    r["mean_nn_distance"] = rep->mean_nn_distance;
    r["per_generated_min_distance"] = rep->per_generated_min_distance;
    j[rep->mode == "pixel" ? "pixel" : "feature"] = std::move(r);
  }
  j["direction_ok"] = cmp.direction_ok;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("privacy report: cannot open " + path);
  os << j.dump(2) << '\n';
}

}  // namespace fgrf::privacy
