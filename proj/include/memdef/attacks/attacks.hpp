// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "memdef/tensor/tensor.hpp"

namespace memdef::attacks {

enum class AttackKind { kFgsm, kBim, kPgd, kCw };

AttackKind parse_attack_kind(const std::string& name);
const char* attack_name(AttackKind kind);

struct AttackConfig {
  AttackKind kind = AttackKind::kPgd;
  double epsilon = 0.03;     // L-inf budget in pixel units
  double step_size = 0.0075;
  int iterations = 40;
  bool random_start = true;  // PGD only
  double clip_min = 0.0;
  double clip_max = 1.0;

  double cw_kappa = 0.0;
  double cw_lr = 5e-3;
  int cw_binary_steps = 5;
  int cw_iterations = 1000;
  double cw_initial_c = 1e-2;

  std::uint64_t seed = 0;

  void validate() const;
};

/// Defaults per attack: BIM 10 x 0.05, PGD 40 x 0.0075 with random start,
/// CW 5 binary-search steps x 1000 iterations at lr 5e-3.
AttackConfig default_attack_config(AttackKind kind, double epsilon);

/// Differentiable map from an input batch [B,...] to logits [B,K].
using LogitsFn = std::function<Tensor<float>(const Tensor<float>&)>;

struct AttackResult {
  Tensor<float> x_adv;
  Tensor<float> delta;          // x_adv - x
  std::vector<std::uint8_t> success;  // prediction on x_adv differs from the label
  std::vector<float> margin;    // z_y - max_{i!=y} z_i at x_adv
};

/// (sum |d|^p)^(1/p); p = infinity gives max |d|. Only p in {1, 2, inf}.
double lp_norm(std::span<const float> d, double p);
/// Per-sample norms of a [B,...] tensor.
std::vector<double> lp_norms(const Tensor<float>& d, double p);

/// Gradient of the sum-reduced cross-entropy w.r.t. x; parameters stay untouched.
Tensor<float> loss_gradient(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels);

/// z_y - max_{i!=y} z_i per row, and its CW hinge max(., -kappa), differentiable.
Tensor<float> cw_margin(const Tensor<float>& logits, std::span<const int> labels, float kappa);

AttackResult fgsm(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels,
                  const AttackConfig& cfg);
AttackResult bim(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels,
                 const AttackConfig& cfg);
AttackResult pgd(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels,
                 const AttackConfig& cfg);
AttackResult cw_l2(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels,
                   const AttackConfig& cfg);

/// Dispatches on cfg.kind.
AttackResult run_attack(const LogitsFn& model, const Tensor<float>& x, std::span<const int> labels,
                        const AttackConfig& cfg);

// --- adversarial record files ----------------------------------------------

struct AdversarialRecord {
  std::uint64_t index = 0;  // row in the source dataset
  int label = 0;
  std::vector<float> delta;
  bool success = false;
};

struct AdversarialSet {
  std::string header_json;  // dataset id, attack kind, config echo
  Shape sample_shape;       // [C,H,W]
  std::vector<AdversarialRecord> records;
};

void write_adversarial_set(const std::string& path, const AdversarialSet& set);
AdversarialSet read_adversarial_set(const std::string& path);

}  // namespace memdef::attacks
