// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/io/checkpoint.hpp"

#include <algorithm>
#include <set>

namespace memdef::io {
namespace {

constexpr std::uint8_t kMagic[4] = {'M', 'D', 'E', 'F'};
constexpr std::uint8_t kFloat32 = 1;

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const nlohmann::json& metadata, const TensorList<float>& tensors) {
  std::set<std::string> names;
  BinaryWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.str(metadata.dump());
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& item : tensors) {
    if (!names.insert(item.name).second) throw FormatError("duplicate tensor name '" + item.name + "'");
    w.str(item.name);
    w.u8(kFloat32);
    w.u32(static_cast<std::uint32_t>(item.tensor.rank()));
    for (auto d : item.tensor.shape()) w.u64(static_cast<std::uint64_t>(d));
    w.f32s(item.tensor.data());
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source) {
  BinaryReader r(std::move(bytes), source);
  auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) r.fail("not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    r.fail("unsupported checkpoint version " + std::to_string(version) + " (this build reads version " +
           std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  const auto meta = r.str();
  try {
    ck.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad metadata: ") + e.what());
  }
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.str();
    const auto dtype = r.u8();
    if (dtype != kFloat32) r.fail("tensor '" + t.name + "' has unsupported dtype tag " + std::to_string(dtype));
    const auto rank = r.u32();
    if (rank > 8) r.fail("tensor '" + t.name + "' has rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.u64();
      if (d > (1ULL << 40)) r.fail("tensor '" + t.name + "' has an implausible dimension");
      shape.push_back(static_cast<std::int64_t>(d));
      numel *= d;
    }
    std::vector<float> values(static_cast<std::size_t>(numel));
    r.f32s(values);
    t.tensor = Tensor<float>(shape, std::move(values));
    if (ck.find(t.name)) r.fail("duplicate tensor '" + t.name + "'");
    ck.tensors.push_back(std::move(t));
  }
  if (!r.at_end()) r.fail("trailing bytes after the last tensor");
  return ck;
}

void write_checkpoint(const std::string& path, const nlohmann::json& metadata, const TensorList<float>& tensors) {
  write_file(path, encode_checkpoint(metadata, tensors));
}

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

void load_tensors(const Checkpoint& checkpoint, const TensorList<float>& target) {
  std::set<std::string> used;
  for (const auto& item : target) {
    const auto* stored = checkpoint.find(item.name);
    if (!stored) throw FormatError("checkpoint is missing tensor '" + item.name + "'");
    if (stored->tensor.shape() != item.tensor.shape())
      throw FormatError("tensor '" + item.name + "' has shape " + shape_str(stored->tensor.shape()) +
                        " in the checkpoint but " + shape_str(item.tensor.shape()) + " in the model");
    auto handle = item.tensor;
    std::ranges::copy(stored->tensor.data(), handle.mutable_data().begin());
    used.insert(item.name);
  }
  for (const auto& t : checkpoint.tensors)
    if (!used.count(t.name)) throw FormatError("checkpoint tensor '" + t.name + "' does not belong to this model");
}

}  // namespace memdef::io
