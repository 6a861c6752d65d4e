// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include "fgrf/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fgrf/rng.hpp"

namespace fgrf::data {

using json = nlohmann::json;

void LabeledImageSet::validate() const {
  if (images.rank() != 4) throw std::invalid_argument("corpus: images must be [N,C,H,W]");
  if (size() < 1) throw std::invalid_argument("corpus: empty image set");
  if (static_cast<int>(labels.size()) != size())
    throw std::invalid_argument("corpus: label count mismatch");
  if (num_classes < 1) throw std::invalid_argument("corpus: num_classes must be >= 1");
  for (int y : labels)
    if (y < 0 || y >= num_classes) throw std::invalid_argument("corpus: label out of range");
  for (float v : images.data)
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("corpus: pixel outside [0,1]");
}

LabeledImageSet LabeledImageSet::subset(const std::vector<int>& idx) const {
  LabeledImageSet out;
  out.num_classes = num_classes;
  out.images = TensorF({static_cast<int>(idx.size()), channels(), height(), width()});
  out.labels.resize(idx.size());
  const long per = images.numel() / size();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const int s = idx[i];
    if (s < 0 || s >= size()) throw std::out_of_range("subset: index out of range");
    std::copy_n(images.ptr() + s * per, per, out.images.ptr() + static_cast<long>(i) * per);
    out.labels[i] = labels[static_cast<std::size_t>(s)];
  }
  return out;
}

void PartitionSpec::validate() const {
  if (num_clients < 1) throw std::invalid_argument("partition: num_clients must be >= 1");
  if (shards_per_client < 1)
    throw std::invalid_argument("partition: shards_per_client must be >= 1");
}

LabeledImageSet make_synthetic_corpus(int num_classes, int per_class,
                                      std::array<int, 3> image_shape, std::uint64_t seed) {
  if (num_classes < 1 || per_class < 1)
    throw std::invalid_argument("corpus: num_classes and per_class must be >= 1");
  const int c = image_shape[0], h = image_shape[1], w = image_shape[2];
  if (c != 1 && c != 3) throw std::invalid_argument("corpus: channels must be 1 or 3");
  if (h < 4 || w < 4) throw std::invalid_argument("corpus: image too small");

  const int n = num_classes * per_class;
  LabeledImageSet set;
  set.num_classes = num_classes;
  set.images = TensorF({n, c, h, w});
  set.labels.resize(static_cast<std::size_t>(n));

  const double mind = std::min(h, w);
  const double ring = 0.28 * mind;
  const double sigma = 0.16 * mind;
  const double two_pi = 6.283185307179586;

  int img = 0;
  for (int cls = 0; cls < num_classes; ++cls) {
    const double angle = two_pi * cls / num_classes;
    const double cy0 = h / 2.0 + ring * std::sin(angle);
    const double cx0 = w / 2.0 + ring * std::cos(angle);
    const double freq = 1.5 + static_cast<double>(cls % 3);
    const double orient = 3.141592653589793 * cls / num_classes;
    for (int rep = 0; rep < per_class; ++rep, ++img) {
      Rng rng(derive_seed(seed, "image", img));
      const double cy = cy0 + rng.uniform(-1.5, 1.5);
      const double cx = cx0 + rng.uniform(-1.5, 1.5);
      const double phase = rng.uniform(0.0, two_pi);
      set.labels[static_cast<std::size_t>(img)] = cls;
      for (int ch = 0; ch < c; ++ch) {
        // slight per-channel tint keeps multi-channel corpora non-degenerate
        const double tint = c == 1 ? 1.0 : 0.7 + 0.3 * ((cls + ch) % 3) / 2.0;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const double dy = (y - cy) / sigma, dx = (x - cx) / sigma;
            const double blob = 0.75 * std::exp(-0.5 * (dy * dy + dx * dx));
            const double u = (x * std::cos(orient) + y * std::sin(orient)) / mind;
            const double grating = 0.18 * std::sin(two_pi * freq * u + phase);
            const double noise = rng.uniform(-0.15, 0.15);
            double v = 0.12 + tint * blob + grating + noise;
            v = std::min(1.0, std::max(0.0, v));
            set.images.at4(img, ch, y, x) = static_cast<float>(v);
          }
        }
      }
    }
  }
  set.validate();
  return set;
}

std::vector<long> label_histogram(const LabeledImageSet& set) {
  std::vector<long> hist(static_cast<std::size_t>(set.num_classes), 0);
  for (int y : set.labels) ++hist[static_cast<std::size_t>(y)];
  return hist;
}

std::vector<std::vector<int>> shard_partition_indices(const LabeledImageSet& set,
                                                      const PartitionSpec& spec) {
  set.validate();
  spec.validate();
  const int n = set.size();
  const long total_shards = static_cast<long>(spec.num_clients) * spec.shards_per_client;
  if (total_shards > n)
    throw std::invalid_argument("partition: more shards than samples");

  // stable sort by label keeps original order inside a label, so shard
  // contents are a pure function of (dataset, spec)
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return set.labels[static_cast<std::size_t>(a)] < set.labels[static_cast<std::size_t>(b)];
  });

  const long shard_size = n / total_shards;  // trailing remainder dropped
  std::vector<int> shard_ids(static_cast<std::size_t>(total_shards));
  std::iota(shard_ids.begin(), shard_ids.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(shard_ids);

  std::vector<std::vector<int>> clients(static_cast<std::size_t>(spec.num_clients));
  for (int k = 0; k < spec.num_clients; ++k) {
    for (int s = 0; s < spec.shards_per_client; ++s) {
      const long shard = shard_ids[static_cast<std::size_t>(k * spec.shards_per_client + s)];
      for (long i = shard * shard_size; i < (shard + 1) * shard_size; ++i)
        clients[static_cast<std::size_t>(k)].push_back(order[static_cast<std::size_t>(i)]);
    }
  }
  return clients;
}

std::vector<ClientDataset> apply_partition(const LabeledImageSet& set,
                                           const std::vector<std::vector<int>>& indices) {
  std::vector<ClientDataset> out;
  out.reserve(indices.size());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    ClientDataset c;
    c.client_id = static_cast<int>(k);
    c.data = set.subset(indices[k]);
    c.label_histogram = label_histogram(c.data);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<ClientDataset> shard_partition(const LabeledImageSet& set, const PartitionSpec& spec) {
  return apply_partition(set, shard_partition_indices(set, spec));
}

void export_partition(const std::string& path, const PartitionSpec& spec,
                      const std::vector<std::vector<int>>& indices) {
  json j;
  j["seed"] = spec.seed;
  j["num_clients"] = spec.num_clients;
  j["shards_per_client"] = spec.shards_per_client;
  j["clients"] = indices;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("partition export: cannot open " + path);
  os << j.dump(2) << '\n';
}

ImportedPartition import_partition(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("partition import: cannot open " + path);
  json j = json::parse(is);
  ImportedPartition p;
  p.spec.seed = j.at("seed").get<std::uint64_t>();
  p.spec.num_clients = j.at("num_clients").get<int>();
  p.spec.shards_per_client = j.at("shards_per_client").get<int>();
  p.indices = j.at("clients").get<std::vector<std::vector<int>>>();
  if (static_cast<int>(p.indices.size()) != p.spec.num_clients)
    throw std::runtime_error("partition import: client count mismatch");
  return p;
}

TrainTestSplit split_train_test(const ClientDataset& client, double test_fraction,
                                std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split: test_fraction in [0,1)");
  const int n = client.data.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const int test_n = static_cast<int>(std::ceil(test_fraction * n));
  const int train_n = n - test_n;
  if (train_n < 1) throw std::invalid_argument("split: no training samples left");
  std::vector<int> train_idx(order.begin(), order.begin() + train_n);
  std::vector<int> test_idx(order.begin() + train_n, order.end());

  TrainTestSplit out;
  out.train.client_id = client.client_id;
  out.train.data = client.data.subset(train_idx);
  out.train.label_histogram = label_histogram(out.train.data);
  out.test.client_id = client.client_id;
  if (test_n > 0) {
    out.test.data = client.data.subset(test_idx);
    out.test.label_histogram = label_histogram(out.test.data);
  } else {
    out.test.data.num_classes = client.data.num_classes;
  }
  return out;
}

}  // namespace fgrf::data
