// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "memdef/tensor/layers.hpp"
#include "memdef/tensor/rng.hpp"
#include "memdef/tensor/tensor.hpp"

namespace memdef {

/// Class-partitioned memory: S rows of width d, slot i belongs to class
/// floor(i / slots_per_class).
template <typename T>
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(std::int64_t slots, std::int64_t dim, int class_count, Rng& rng);

  const Tensor<T>& items() const { return items_; }
  std::int64_t slots() const { return items_.defined() ? items_.dim(0) : 0; }
  std::int64_t dim() const { return items_.defined() ? items_.dim(1) : 0; }
  int class_count() const { return class_count_; }
  std::int64_t slots_per_class() const { return class_count_ ? slots() / class_count_ : 0; }
  int slot_class(std::int64_t slot) const;
  bool empty() const { return slots() == 0; }

  void collect(const std::string& prefix, TensorList<T>& out) const;

 private:
  Tensor<T> items_;
  int class_count_ = 0;
};

struct ShrinkConfig {
  double phi = 0.0025;           // hard-shrinkage threshold
  double epsilon_num = 1e-12;    // stabiliser in the shrink and renormalisation denominators
  bool enabled = true;
};

/// Soft addressing split by a class mask.
template <typename T>
struct AttentionWeights {
  Tensor<T> w_bar;   // [B,S] softmax addressing (after shrinkage when enabled)
  Tensor<T> w;       // w_bar restricted to the selected class slots
  Tensor<T> w_hat;   // w_bar on every other slot
  Tensor<T> mask;    // [B,S] 0/1
  Tensor<T> unmask;  // 1 - mask
};

template <typename T>
struct ShrinkResult {
  Tensor<T> weights;
  std::vector<std::int64_t> empty_rows;  // rows shrunk to all-zero
};

/// logits[b,i] = <z_b, m_i> / max(|z_b| |m_i|, eps). When `grad_mask` [B,S]
/// is given, the contribution of logit (b,i) to the gradient of the memory
/// rows is gated by grad_mask[b,i]; the gradient of z is never gated.
template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& z, const Tensor<T>& items, T eps,
                            const Tensor<T>& grad_mask = Tensor<T>());

template <typename T>
Tensor<T> cosine_logits(const Tensor<T>& z, const MemoryBank<T>& bank, T eps = T(1e-12),
                        const Tensor<T>& grad_mask = Tensor<T>());

/// Softmax over the slot axis.
template <typename T>
Tensor<T> address(const Tensor<T>& logits);

/// Elementwise max(w - phi, 0) * w / (|w - phi| + eps).
template <typename T>
Tensor<T> hard_shrink_values(const Tensor<T>& w, T phi, T eps);

/// Row-wise w / max(sum |w|, eps); all-zero rows stay zero.
template <typename T>
Tensor<T> l1_normalize_rows(const Tensor<T>& w, T eps);

/// Shrink then L1-renormalise. Zero rows are reported, not repaired.
template <typename T>
ShrinkResult<T> hard_shrink(const Tensor<T>& w_bar, const ShrinkConfig& cfg);

/// Length-S mask with ones on the slots of `class_id`, and its complement.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> one_hot_mask(int class_id, const MemoryBank<T>& bank);

/// Per-row masks [B,S] for a batch of class ids.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> class_masks(std::span<const int> classes, const MemoryBank<T>& bank);

template <typename T>
AttentionWeights<T> split_weights(const Tensor<T>& w_bar, const Tensor<T>& mask,
                                  const Tensor<T>& unmask);

/// z_hat = weights . M
template <typename T>
Tensor<T> latent_recombine(const Tensor<T>& weights, const MemoryBank<T>& bank);

/// sum of -w log w over every entry, with 0 log 0 = 0. Throws on negative entries.
template <typename T>
Tensor<T> attention_entropy(const Tensor<T>& weights, T eps = T(1e-12));

/// Number of strictly positive entries per row.
template <typename T>
std::vector<std::int64_t> row_support(const Tensor<T>& weights);

extern template class MemoryBank<float>;
extern template class MemoryBank<double>;

}  // namespace memdef
