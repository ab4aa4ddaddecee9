// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/data/batch.hpp"

#include <numeric>
#include <stdexcept>

namespace memdef::data {

BatchIterator::BatchIterator(const Dataset& dataset, std::int64_t batch_size, std::uint64_t seed, bool shuffle)
    : dataset_(&dataset), batch_size_(batch_size), shuffle_(shuffle), rng_(seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  order_.resize(static_cast<std::size_t>(dataset.size()));
  std::iota(order_.begin(), order_.end(), std::int64_t{0});
  if (shuffle_) rng_.shuffle(std::span<std::int64_t>(order_));
}

bool BatchIterator::next(Batch& out) {
  const auto total = static_cast<std::int64_t>(order_.size());
  if (cursor_ >= total) return false;
  const auto end = std::min(total, cursor_ + batch_size_);
  out.indices.assign(order_.begin() + cursor_, order_.begin() + end);
  cursor_ = end;
  auto picked = subset(*dataset_, out.indices);
  out.images = std::move(picked.images);
  out.labels = std::move(picked.labels);
  return true;
}

void BatchIterator::new_epoch() {
  ++epoch_;
  cursor_ = 0;
  if (shuffle_) {
    std::iota(order_.begin(), order_.end(), std::int64_t{0});
    rng_.shuffle(std::span<std::int64_t>(order_));
  }
}

std::int64_t BatchIterator::batches_per_epoch() const {
  return (static_cast<std::int64_t>(order_.size()) + batch_size_ - 1) / batch_size_;
}

}  // namespace memdef::data
