// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "memdef/attacks/attacks.hpp"
#include "memdef/nets/networks.hpp"
#include "memdef/training/model.hpp"

namespace memdef::defense {

/// Wall time per sample, in seconds: the batch time of each stage divided by
/// the batch size.
struct StageLatency {
  double selector = 0.0;
  double reconstruct = 0.0;  // encoder, attention, decoder
  double classify = 0.0;
  double total = 0.0;
};

struct DefenseVerdict {
  int selector_class = -1;            // -1 when the variant has no selector
  int final_class = 0;                // classifier-B on the reconstruction
  double reconstruction_error = 0.0;  // per-pixel MSE(x, x_hat); 0 for the bare variant
  std::int64_t attention_sparsity = 0;  // nonzero addressing weights on the masked path
  StageLatency latency;
};

struct SlotReconstruction {
  Tensor<float> x_hat;             // raw decoder output
  std::vector<double> errors;      // per-pixel MSE per sample
};

/// Inference over a frozen model: selector picks the slot, the memory path
/// reconstructs, classifier-B gives the final label. Everything runs in eval
/// mode, so calls never change model state.
class DefensePipeline {
 public:
  /// `selector` may be null unless the model is the full variant.
  DefensePipeline(training::DefenseModel& model, nets::ResidualSelector<float>* selector);

  std::vector<DefenseVerdict> classify(const Tensor<float>& x);

  /// Reconstruction with every row masked to `class_id`, ignoring the selector.
  SlotReconstruction reconstruct_with_slot(const Tensor<float>& x, int class_id);

  /// Reconstruction errors of every row against every class slot, [B][classes].
  std::vector<std::vector<double>> slot_errors(const Tensor<float>& x);

  /// Eval-mode selector classes.
  std::vector<int> select(const Tensor<float>& x);

  /// Differentiable logits of the whole pipeline with the slot of each row
  /// held at `slots` (ignored by the variants without memory).
  attacks::LogitsFn logits_fn(std::vector<int> slots);

  /// Attack entry point: slots are fixed at the selector prediction on x.
  attacks::AttackResult attack(const Tensor<float>& x, std::span<const int> labels, const attacks::AttackConfig& cfg);

  training::DefenseModel& model() { return *model_; }

 private:
  training::DefenseModel* model_;
  nets::ResidualSelector<float>* selector_;
};

/// Per-sample per-pixel mean squared error.
std::vector<double> per_sample_mse(const Tensor<float>& x, const Tensor<float>& x_hat);

/// Fraction of rows of `errors` whose entry at labels[i] is strictly below every other entry.
double slot_discrimination(const std::vector<std::vector<double>>& errors, std::span<const int> labels);

}  // namespace memdef::defense
