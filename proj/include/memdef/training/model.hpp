// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "memdef/memory/attention.hpp"
#include "memdef/nets/networks.hpp"
#include "memdef/tensor/layers.hpp"
#include "memdef/training/losses.hpp"

namespace memdef::training {

/// kBare: classifier-B on raw pixels. kNoMemory: z feeds the decoder directly.
/// kFull: encoder, class-partitioned memory, decoder, classifier-B.
enum class Variant { kBare, kNoMemory, kFull };

Variant parse_variant(const std::string& name);
const char* variant_name(Variant variant);

struct DefenseSpec {
  nets::DatasetKind dataset = nets::DatasetKind::kFashionMnist;
  Variant variant = Variant::kFull;
  std::int64_t memory_slots = 100;
  ShrinkConfig shrink;
  int classes = 10;

  void validate() const;
};

/// 100 slots for Fashion-MNIST, 200 for CIFAR-10.
std::int64_t default_memory_slots(nets::DatasetKind kind);

/// Stage-2 model: everything except the selector.
class DefenseModel {
 public:
  DefenseModel(const DefenseSpec& spec, std::uint64_t seed);

  const DefenseSpec& spec() const { return spec_; }
  const nets::AutoencoderSpec& autoencoder() const { return ae_spec_; }
  bool uses_autoencoder() const { return spec_.variant != Variant::kBare; }
  bool uses_memory() const { return spec_.variant == Variant::kFull; }

  /// Every named tensor (parameters and BN buffers) of the active variant.
  TensorList<float> tensors() const;

  nets::Encoder<float> encoder;
  nets::Decoder<float> decoder;
  MemoryBank<float> memory;
  nets::ClassifierB<float> classifier;

 private:
  DefenseSpec spec_;
  nets::AutoencoderSpec ae_spec_;
};

struct ForwardPass {
  Tensor<float> z;        // [B,d]
  Tensor<float> x_hat;    // target reconstruction, raw decoder output
  Tensor<float> x_prime;  // non-target reconstruction; undefined unless requested
  AttentionWeights<float> attention;  // undefined for kNoMemory
  std::vector<std::int64_t> empty_rows;
};

/// Encode, address, shrink, mask with `classes` (one per row), decode. The
/// class mask also gates the memory gradient of the cosine logits. For
/// kNoMemory the classes are ignored. The non-target decode uses batch
/// statistics without touching the running estimates.
ForwardPass reconstruct(DefenseModel& model, const Tensor<float>& x, std::span<const int> classes, bool training,
                        bool with_non_target = false);

/// Logits of classifier-B on the reconstruction (or on x for kBare).
Tensor<float> defense_logits(DefenseModel& model, const Tensor<float>& x, std::span<const int> classes,
                             bool training);

struct LossTerms {
  Tensor<float> loss;
  double target = 0.0;      // target loss, or plain reconstruction loss for kNoMemory
  double non_target = 0.0;
  double cross_entropy = 0.0;
  int correct = 0;          // classifier-B hits on the batch
};

/// Stage-2 objective on one batch. `input` is the (possibly noisy) network
/// input; reconstructions are compared against `clean`. Terms with zero weight
/// are not evaluated.
LossTerms defense_objective(DefenseModel& model, const Tensor<float>& input, const Tensor<float>& clean,
                            std::span<const int> labels, const LossConfig& cfg);

}  // namespace memdef::training
