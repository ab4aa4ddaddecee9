// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/training/model.hpp"

#include <stdexcept>
#include <string>

#include "memdef/tensor/ops.hpp"

namespace memdef::training {

Variant parse_variant(const std::string& name) {
  if (name == "bare") return Variant::kBare;
  if (name == "nomem" || name == "no-memory") return Variant::kNoMemory;
  if (name == "full") return Variant::kFull;
  throw std::invalid_argument("unknown variant '" + name + "' (expected bare, nomem or full)");
}

const char* variant_name(Variant variant) {
  switch (variant) {
    case Variant::kBare: return "bare";
    case Variant::kNoMemory: return "nomem";
    case Variant::kFull: return "full";
  }
  return "?";
}

void DefenseSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("defense needs at least 2 classes");
  if (variant == Variant::kFull) {
    if (memory_slots <= 0 || memory_slots % classes != 0)
      throw std::invalid_argument("memory size " + std::to_string(memory_slots) +
                                  " must be a positive multiple of the class count " + std::to_string(classes));
  }
  if (shrink.phi < 0 || shrink.phi >= 1) throw std::invalid_argument("shrink threshold phi must be in [0,1)");
  if (!(shrink.epsilon_num > 0)) throw std::invalid_argument("shrink epsilon must be > 0");
}

std::int64_t default_memory_slots(nets::DatasetKind kind) {
  return kind == nets::DatasetKind::kCifar10 ? 200 : 100;
}

DefenseModel::DefenseModel(const DefenseSpec& spec, std::uint64_t seed)
    : spec_(spec), ae_spec_(nets::autoencoder_spec(spec.dataset)) {
  spec_.validate();
  Rng root(seed);
  Rng enc_rng = root.fork(), dec_rng = root.fork(), mem_rng = root.fork(), cls_rng = root.fork();
  if (uses_autoencoder()) {
    encoder = nets::Encoder<float>(ae_spec_, enc_rng);
    decoder = nets::Decoder<float>(ae_spec_, dec_rng);
  }
  if (uses_memory()) memory = MemoryBank<float>(spec_.memory_slots, ae_spec_.latent_dim, spec_.classes, mem_rng);
  classifier = nets::ClassifierB<float>(ae_spec_.image, cls_rng);
}

TensorList<float> DefenseModel::tensors() const {
  TensorList<float> out;
  if (uses_autoencoder()) {
    encoder.collect("encoder", out);
    decoder.collect("decoder", out);
  }
  if (uses_memory()) memory.collect("memory", out);
  classifier.collect("classifier", out);
  return out;
}

ForwardPass reconstruct(DefenseModel& model, const Tensor<float>& x, std::span<const int> classes, bool training,
                        bool with_non_target) {
  if (!model.uses_autoencoder()) throw std::logic_error("reconstruct: the bare variant has no autoencoder");
  ForwardPass out;
  out.z = model.encoder.forward(x, training);
  if (!model.uses_memory()) {
    out.x_hat = model.decoder.forward(out.z, training);
    return out;
  }
  if (static_cast<std::int64_t>(classes.size()) != x.dim(0))
    throw ShapeError("reconstruct: " + std::to_string(classes.size()) + " classes for a batch of " +
                     std::to_string(x.dim(0)));
  const auto& shrink = model.spec().shrink;
  auto [mask, unmask] = class_masks(classes, model.memory);
  auto w_bar = address(cosine_logits(out.z, model.memory, static_cast<float>(shrink.epsilon_num), mask));
  if (shrink.enabled) {
    auto shrunk = hard_shrink(w_bar, shrink);
    w_bar = shrunk.weights;
    out.empty_rows = std::move(shrunk.empty_rows);
  }
  out.attention = split_weights(w_bar, mask, unmask);
  out.x_hat = model.decoder.forward(latent_recombine(out.attention.w, model.memory), training);
  if (with_non_target)
    out.x_prime = model.decoder.forward(latent_recombine(out.attention.w_hat, model.memory), training, false);
  return out;
}

Tensor<float> defense_logits(DefenseModel& model, const Tensor<float>& x, std::span<const int> classes,
                             bool training) {
  if (!model.uses_autoencoder()) return model.classifier.forward(x);
  return model.classifier.forward(reconstruct(model, x, classes, training).x_hat);
}

LossTerms defense_objective(DefenseModel& model, const Tensor<float>& input, const Tensor<float>& clean,
                            std::span<const int> labels, const LossConfig& cfg) {
  cfg.validate();
  LossTerms terms;
  auto count_hits = [&](const Tensor<float>& logits) {
    auto predicted = argmax_rows(logits);
    for (std::size_t i = 0; i < predicted.size(); ++i) terms.correct += predicted[i] == labels[i];
  };
  if (!model.uses_autoencoder()) {
    auto logits = model.classifier.forward(input);
    terms.loss = cross_entropy(logits, labels);
    terms.cross_entropy = terms.loss.item();
    count_hits(logits);
    return terms;
  }
  const bool non_target = model.uses_memory() && cfg.beta > 0;
  auto pass = reconstruct(model, input, labels, true, non_target);
  Tensor<float> loss;
  if (model.uses_memory()) {
    auto target = target_loss(clean, pass.x_hat, pass.attention.w, cfg.alpha);
    terms.target = target.item();
    if (non_target) {
      auto other = non_target_loss(clean, pass.x_prime, pass.attention.w_hat, cfg.alpha);
      terms.non_target = other.item();
      loss = total_loss(target, other, cfg);
    } else {
      loss = target;
    }
  } else {
    loss = reconstruction_loss(clean, pass.x_hat);
    terms.target = loss.item();
  }
  if (cfg.gamma > 0) {
    auto logits = model.classifier.forward(pass.x_hat);
    auto ce = cross_entropy(logits, labels);
    terms.cross_entropy = ce.item();
    count_hits(logits);
    loss = add(loss, scale(ce, static_cast<float>(cfg.gamma)));
  }
  terms.loss = loss;
  return terms;
}

}  // namespace memdef::training
