// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "memdef/tensor/tensor.hpp"

namespace memdef::data {

/// Malformed or unreadable dataset file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { kTrain, kTest };

const char* split_name(Split split);

struct Dataset {
  Tensor<float> images;     // [N,C,H,W], values in [0,1]
  std::vector<int> labels;  // length N
  Split split = Split::kTrain;
  int class_count = 10;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t channels() const { return images.dim(1); }
  std::int64_t height() const { return images.dim(2); }
  std::int64_t width() const { return images.dim(3); }
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::int64_t kCifarRecordBytes = 3073;

/// Reads an IDX image/label pair. Paths ending in .gz are inflated transparently.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 Split split = Split::kTrain);

/// Writes pixels as round(255 x). A .gz suffix selects gzip output.
void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& dataset);

/// One CIFAR-10 binary batch file.
Dataset load_cifar_file(const std::string& path, Split split = Split::kTrain);

/// data_batch_1..5.bin for the train split, test_batch.bin for the test split.
Dataset load_cifar_batches(const std::string& dir_path, Split split = Split::kTrain);

void write_cifar_file(const std::string& path, const Dataset& dataset);

/// Rows in the given order.
Dataset subset(const Dataset& dataset, std::span<const std::int64_t> indices);

/// First `per_class` samples of each class in file order, kept in file order.
Dataset take_per_class(const Dataset& dataset, std::int64_t per_class);

/// Checks the invariants every loader promises.
void validate(const Dataset& dataset);

}  // namespace memdef::data
