// Copyright (c) 2026 the fgrf authors
// SPDX-License-Identifier: Apache-2.0
#include "fgrf/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fgrf::io {

using json = nlohmann::json;

namespace {
constexpr char kMagic[4] = {'F', 'G', 'R', 'F'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void append_raw(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T read_raw(const std::vector<std::uint8_t>& in, std::size_t& off) {
  if (off + sizeof(T) > in.size()) throw std::runtime_error("checkpoint: truncated header");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}
}  // namespace

const CheckpointEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void Checkpoint::add(const std::string& name, std::vector<int> shape, std::vector<float> data) {
  if (static_cast<std::size_t>(TensorF::numel_of(shape)) != data.size())
    throw std::invalid_argument("checkpoint: shape/data mismatch for " + name);
  if (find(name)) throw std::invalid_argument("checkpoint: duplicate entry " + name);
  entries.push_back({name, std::move(shape), std::move(data)});
}

long Checkpoint::total_values() const {
  long n = 0;
  for (const auto& e : entries) n += static_cast<long>(e.data.size());
  return n;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  json meta;
  meta["kind"] = ckpt.kind;
  meta["architecture_id"] = ckpt.architecture_id;
  meta["seed"] = ckpt.seed;
  meta["creation_step"] = ckpt.creation_step;
  meta["extra"] = ckpt.extra;
  json entries = json::array();
  for (const auto& e : ckpt.entries) entries.push_back({{"name", e.name}, {"shape", e.shape}});
  meta["entries"] = std::move(entries);
  const std::string meta_str = meta.dump();

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  append_raw(out, kVersion);
  append_raw(out, static_cast<std::uint64_t>(meta_str.size()));
  out.insert(out.end(), meta_str.begin(), meta_str.end());
  for (const auto& e : ckpt.entries) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(e.data.data());
    out.insert(out.end(), p, p + e.data.size() * sizeof(float));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  std::size_t off = 0;
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  off = 4;
  const auto version = read_raw<std::uint32_t>(bytes, off);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");
  const auto meta_len = read_raw<std::uint64_t>(bytes, off);
  if (off + meta_len > bytes.size()) throw std::runtime_error("checkpoint: truncated metadata");
  const json meta = json::parse(bytes.begin() + static_cast<long>(off),
                                bytes.begin() + static_cast<long>(off + meta_len));
  off += meta_len;

  Checkpoint ckpt;
  ckpt.kind = meta.at("kind").get<std::string>();
  ckpt.architecture_id = meta.at("architecture_id").get<std::string>();
  ckpt.seed = meta.at("seed").get<std::uint64_t>();
  ckpt.creation_step = meta.at("creation_step").get<long>();
  ckpt.extra = meta.at("extra");
  for (const auto& e : meta.at("entries")) {
    CheckpointEntry entry;
    entry.name = e.at("name").get<std::string>();
    entry.shape = e.at("shape").get<std::vector<int>>();
    const auto n = static_cast<std::size_t>(TensorF::numel_of(entry.shape));
    if (off + n * sizeof(float) > bytes.size())
      throw std::runtime_error("checkpoint: truncated payload at " + entry.name);
    entry.data.resize(n);
    std::memcpy(entry.data.data(), bytes.data() + off, n * sizeof(float));
    off += n * sizeof(float);
    ckpt.entries.push_back(std::move(entry));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  const auto size = static_cast<std::size_t>(is.tellg());
  is.seekg(0);
  std::vector<std::uint8_t> bytes(size);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<long>(size));
  if (!is) throw std::runtime_error("checkpoint: read failed for " + path);
  return deserialize_checkpoint(bytes);
}

Checkpoint snapshot(const std::string& kind, const std::string& architecture_id,
                    const nn::ParamList<float>& params,
                    const std::vector<std::pair<std::string, TensorF*>>& buffers,
                    std::uint64_t seed, long creation_step) {
  Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.architecture_id = architecture_id;
  ckpt.seed = seed;
  ckpt.creation_step = creation_step;
  for (const auto& p : params) ckpt.add(p.name, p.value->shape, p.value->data);
  for (const auto& b : buffers) ckpt.add("buffer." + b.first, b.second->shape, b.second->data);
  return ckpt;
}

void restore(const Checkpoint& ckpt, const std::string& expected_architecture_id,
             const nn::ParamList<float>& params,
             const std::vector<std::pair<std::string, TensorF*>>& buffers) {
  if (ckpt.architecture_id != expected_architecture_id)
    throw std::runtime_error("checkpoint: architecture mismatch (have '" + ckpt.architecture_id +
                             "', expected '" + expected_architecture_id + "')");
  // validate the complete shape table first
  for (const auto& p : params) {
    const auto* e = ckpt.find(p.name);
    if (!e) throw std::runtime_error("checkpoint: missing entry " + p.name);
    if (e->shape != p.value->shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name);
  }
  for (const auto& b : buffers) {
    const auto* e = ckpt.find("buffer." + b.first);
    if (!e) throw std::runtime_error("checkpoint: missing buffer " + b.first);
    if (e->shape != b.second->shape)
      throw std::runtime_error("checkpoint: shape mismatch for buffer " + b.first);
  }
  for (const auto& p : params) p.value->data = ckpt.find(p.name)->data;
  for (const auto& b : buffers) b.second->data = ckpt.find("buffer." + b.first)->data;
}

}  // namespace fgrf::io
