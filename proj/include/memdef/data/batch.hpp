// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "memdef/data/dataset.hpp"
#include "memdef/tensor/rng.hpp"

namespace memdef::data {

struct Batch {
  Tensor<float> images;
  std::vector<int> labels;
  std::vector<std::int64_t> indices;  // rows of the source dataset
};

/// Seeded epoch iterator. Each epoch visits a fresh permutation; the final
/// short batch is emitted.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::int64_t batch_size, std::uint64_t seed, bool shuffle = true);

  /// Fills `out` with the next batch of the current epoch; false at epoch end.
  bool next(Batch& out);
  /// Starts the next epoch with a new permutation.
  void new_epoch();

  std::int64_t batches_per_epoch() const;
  std::int64_t epoch() const { return epoch_; }

 private:
  const Dataset* dataset_;
  std::int64_t batch_size_;
  bool shuffle_;
  Rng rng_;
  std::vector<std::int64_t> order_;
  std::int64_t cursor_ = 0;
  std::int64_t epoch_ = 0;
};

}  // namespace memdef::data
