// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fgrf/tensor.hpp"

namespace fgrf::data {

struct LabeledImageSet {
  TensorF images;           // [N, C, H, W], values in [0,1]
  std::vector<int> labels;  // class ids < num_classes
  int num_classes = 0;

  int size() const { return images.rank() ? images.dim(0) : 0; }
  int channels() const { return images.dim(1); }
  int height() const { return images.dim(2); }
  int width() const { return images.dim(3); }

  void validate() const;
  LabeledImageSet subset(const std::vector<int>& idx) const;
};

struct ClientDataset {
  int client_id = 0;
  LabeledImageSet data;
  std::vector<long> label_histogram;  // length num_classes, sums to data size
};

struct PartitionSpec {
  int num_clients = 1;
  int shards_per_client = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic structured corpus: each class is a blob at a class-specific
/// ring position plus an oriented grating, with per-image jitter, random
/// grating phase and pixel noise so no two images coincide. Learnable by a
/// small CNN in a couple of epochs.
LabeledImageSet make_synthetic_corpus(int num_classes, int per_class,
                                      std::array<int, 3> image_shape, std::uint64_t seed);

std::vector<long> label_histogram(const LabeledImageSet& set);

/// Sort-by-label sharding: indices are stably sorted by label, cut into
/// num_clients * shards_per_client contiguous shards (trailing remainder
/// dropped), shards shuffled by the spec seed and dealt out
/// shards_per_client apiece.
std::vector<std::vector<int>> shard_partition_indices(const LabeledImageSet& set,
                                                      const PartitionSpec& spec);

std::vector<ClientDataset> shard_partition(const LabeledImageSet& set, const PartitionSpec& spec);

/// Materialize clients from explicit per-client index lists (the import path
/// for partitions that come from a file, e.g. natural-region splits).
std::vector<ClientDataset> apply_partition(const LabeledImageSet& set,
                                           const std::vector<std::vector<int>>& indices);

void export_partition(const std::string& path, const PartitionSpec& spec,
                      const std::vector<std::vector<int>>& indices);

struct ImportedPartition {
  PartitionSpec spec;
  std::vector<std::vector<int>> indices;
};
ImportedPartition import_partition(const std::string& path);

/// Per-client train/test split (last ceil(fraction*N) of a seeded shuffle
/// becomes the held-out set). Both halves keep the parent client_id.
struct TrainTestSplit {
  ClientDataset train;
  ClientDataset test;
};
TrainTestSplit split_train_test(const ClientDataset& client, double test_fraction,
                                std::uint64_t seed);

}  // namespace fgrf::data
