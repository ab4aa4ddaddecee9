// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "memdef/io/binary.hpp"
#include "memdef/tensor/layers.hpp"

namespace memdef::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Tensor<float> tensor;
};

/// "MDEF" | u32 version | str metadata (JSON, sorted keys) | u32 count |
/// records of (str name, u8 dtype, u32 rank, u64 dims..., little-endian payload).
struct Checkpoint {
  nlohmann::json metadata;
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const nlohmann::json& metadata, const TensorList<float>& tensors);
Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source);

void write_checkpoint(const std::string& path, const nlohmann::json& metadata, const TensorList<float>& tensors);
Checkpoint read_checkpoint(const std::string& path);

/// Copies the checkpoint values into `target` in place. Every target tensor
/// must be present with the same shape and every stored tensor must be used.
void load_tensors(const Checkpoint& checkpoint, const TensorList<float>& target);

}  // namespace memdef::io
