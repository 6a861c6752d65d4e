// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: a little-endian binary archive of named float32
// arrays plus a JSON metadata record.
//
//   bytes 0..3   magic "FGRF"
//   u32          format version (1)
//   u64          metadata length in bytes
//   ...          metadata JSON: {kind, architecture_id, seed, creation_step,
//                entries: [{name, shape}], extra}
//   ...          raw float32 payload for each entry, in metadata order
//
// Loads validate the full shape table against the receiving model before a
// single value is materialized.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fgrf/nn.hpp"
#include "fgrf/tensor.hpp"

namespace fgrf::io {

struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string kind = "net";
  std::string architecture_id;
  std::uint64_t seed = 0;
  long creation_step = 0;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<CheckpointEntry> entries;

  const CheckpointEntry* find(const std::string& name) const;
  void add(const std::string& name, std::vector<int> shape, std::vector<float> data);
  long total_values() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Snapshot a live model (params + named buffers) into a container.
Checkpoint snapshot(const std::string& kind, const std::string& architecture_id,
                    const nn::ParamList<float>& params,
                    const std::vector<std::pair<std::string, TensorF*>>& buffers,
                    std::uint64_t seed, long creation_step);

/// Restore params + buffers from a container. Throws on architecture-id or
/// shape-table mismatch before touching any tensor.
void restore(const Checkpoint& ckpt, const std::string& expected_architecture_id,
             const nn::ParamList<float>& params,
             const std::vector<std::pair<std::string, TensorF*>>& buffers);

}  // namespace fgrf::io
