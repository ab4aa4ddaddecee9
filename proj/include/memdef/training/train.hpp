// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "memdef/attacks/attacks.hpp"
#include "memdef/data/augment.hpp"
#include "memdef/data/dataset.hpp"
#include "memdef/nets/networks.hpp"
#include "memdef/tensor/adam.hpp"
#include "memdef/training/losses.hpp"
#include "memdef/training/model.hpp"

namespace memdef::training {

enum class Stage { kSelector, kDefense };

const char* stage_name(Stage stage);

struct TrainPlan {
  Stage stage = Stage::kDefense;
  int epochs = 10;
  std::int64_t batch_size = 64;
  AdamConfig adam{.lr = 1e-3};
  data::AugmentPolicy augment;
  double l2 = 0.0;             // coupled L2 on every parameter except the memory bank
  std::uint64_t seed = 0;
  std::int64_t max_steps = 0;  // 0: no cap

  void validate() const;
};

/// Receives one JSON object per metrics record.
using MetricsSink = std::function<void(const nlohmann::json&)>;

/// Raised when a loss or gradient turns non-finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DefenseTrainReport {
  std::int64_t steps = 0;
  double last_loss = 0.0;
  double last_target = 0.0;
};

/// Stage 2: benign data only, masks from ground-truth labels.
DefenseTrainReport train_defense(DefenseModel& model, const data::Dataset& train, const TrainPlan& plan,
                                 const LossConfig& loss, const MetricsSink& sink = {});

// --- stage 1 ----------------------------------------------------------------

/// Re-estimates the BN running statistics from `passes` sequential passes
/// over `data` in training mode; weights are untouched.
void recalibrate_batch_norm(nets::ResidualSelector<float>& selector, const data::Dataset& data,
                            std::int64_t batch_size, int passes = 3);

/// Benign epochs (phase A), then BN recalibration on the un-augmented training
/// images. Returns the number of optimizer steps.
std::int64_t train_selector_benign(nets::ResidualSelector<float>& selector, const data::Dataset& train,
                                   const TrainPlan& plan, const MetricsSink& sink = {});

/// Attacks every sample of `source` against the eval-mode selector, in
/// batches of `batch_size`. Every record is kept, with its success flag.
attacks::AdversarialSet generate_adversarial(nets::ResidualSelector<float>& selector, const data::Dataset& source,
                                             const attacks::AttackConfig& attack, std::int64_t batch_size);

/// Images x + delta for the records of `set` (only successful ones when asked).
/// Throws DataError when a record does not match the source.
data::Dataset materialize(const data::Dataset& source, const attacks::AdversarialSet& set, bool successful_only);

/// Phase B: each batch takes batch_size/2 adversarial rows and the rest benign.
/// An epoch is one pass over the adversarial rows; benign rows are augmented.
/// Ends with BN recalibration on the benign images.
std::int64_t train_selector_mixture(nets::ResidualSelector<float>& selector, const data::Dataset& benign,
                                    const data::Dataset& adversarial, const TrainPlan& plan,
                                    const MetricsSink& sink = {});

/// Fraction of correct eval-mode predictions.
double selector_accuracy(nets::ResidualSelector<float>& selector, const data::Dataset& dataset,
                         std::int64_t batch_size = 256);

struct SelectorPlan {
  TrainPlan benign;
  TrainPlan mixture;
  attacks::AttackConfig attack;
  std::int64_t attack_batch = 128;
};

struct SelectorReport {
  std::int64_t attempted = 0;
  std::int64_t kept = 0;                     // successful adversarial examples used in phase B
  double adversarial_accuracy_before = 0.0;  // on the kept set, after phase A
  double adversarial_accuracy_after = 0.0;   // on the kept set, after phase B
};

/// Phase A, offline attack against the phase-A selector, phase B. Throws
/// std::runtime_error when no attack succeeded.
SelectorReport train_selector(nets::ResidualSelector<float>& selector, const data::Dataset& train,
                              const SelectorPlan& plan, const MetricsSink& sink = {});

}  // namespace memdef::training
