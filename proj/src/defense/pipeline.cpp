// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/defense/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

#include "memdef/tensor/ops.hpp"

namespace memdef::defense {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::vector<double> per_sample_mse(const Tensor<float>& x, const Tensor<float>& x_hat) {
  if (x.shape() != x_hat.shape())
    throw ShapeError("per_sample_mse: " + shape_str(x.shape()) + " vs " + shape_str(x_hat.shape()));
  const auto rows = x.dim(0);
  const auto cols = static_cast<std::int64_t>(x.numel()) / std::max<std::int64_t>(rows, 1);
  std::vector<double> out(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    double s = 0;
    for (std::int64_t c = 0; c < cols; ++c) {
      const double d = static_cast<double>(x.ptr()[r * cols + c]) - x_hat.ptr()[r * cols + c];
      s += d * d;
    }
    out[static_cast<std::size_t>(r)] = s / static_cast<double>(cols);
  }
  return out;
}

double slot_discrimination(const std::vector<std::vector<double>>& errors, std::span<const int> labels) {
  if (errors.size() != labels.size()) throw std::invalid_argument("slot_discrimination: size mismatch");
  if (errors.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    bool best = true;
    for (std::size_t c = 0; c < errors[i].size(); ++c)
      if (c != y && !(errors[i][y] < errors[i][c])) best = false;
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

DefensePipeline::DefensePipeline(training::DefenseModel& model, nets::ResidualSelector<float>* selector)
    : model_(&model), selector_(selector) {
  if (model.uses_memory() && !selector) throw std::invalid_argument("the full defense variant needs a selector");
}

std::vector<int> DefensePipeline::select(const Tensor<float>& x) {
  if (!selector_) throw std::logic_error("pipeline has no selector");
  return nets::selector_predict(*selector_, x).classes;
}

std::vector<DefenseVerdict> DefensePipeline::classify(const Tensor<float>& x) {
  const auto image = model_->autoencoder().image;
  if (x.rank() != 4 || x.dim(1) != image.channels || x.dim(2) != image.height || x.dim(3) != image.width)
    throw ShapeError("defend_classify: expected [B," + std::to_string(image.channels) + "," +
                     std::to_string(image.height) + "," + std::to_string(image.width) + "], got " +
                     shape_str(x.shape()));
  const auto batch = static_cast<std::size_t>(x.dim(0));
  std::vector<DefenseVerdict> out(batch);
  if (batch == 0) return out;

  const auto start = Clock::now();
  std::vector<int> slots;
  double t_select = 0, t_reconstruct = 0;
  if (model_->uses_memory()) {
    auto t0 = Clock::now();
    slots = select(x);
    t_select = seconds_since(t0);
  }
  Tensor<float> input = x;
  std::vector<double> errors(batch, 0.0);
  std::vector<std::int64_t> support(batch, 0);
  if (model_->uses_autoencoder()) {
    auto t0 = Clock::now();
    auto pass = training::reconstruct(*model_, x, slots.empty() ? std::vector<int>(batch, 0) : slots, false);
    t_reconstruct = seconds_since(t0);
    input = pass.x_hat;
    errors = per_sample_mse(x, pass.x_hat);
    if (model_->uses_memory()) support = row_support(pass.attention.w);
  }
  auto t0 = Clock::now();
  auto prediction = nets::target_classify(model_->classifier, input);
  const double t_classify = seconds_since(t0);
  const double total = seconds_since(start);

  const double per = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    auto& v = out[i];
    v.selector_class = slots.empty() ? -1 : slots[i];
    v.final_class = prediction.classes[i];
    v.reconstruction_error = errors[i];
    v.attention_sparsity = support[i];
    v.latency = {t_select * per, t_reconstruct * per, t_classify * per, total * per};
  }
  return out;
}

SlotReconstruction DefensePipeline::reconstruct_with_slot(const Tensor<float>& x, int class_id) {
  if (!model_->uses_memory()) throw std::logic_error("reconstruct_with_slot needs the full variant");
  if (class_id < 0 || class_id >= model_->spec().classes)
    throw std::out_of_range("class id " + std::to_string(class_id) + " outside [0," +
                            std::to_string(model_->spec().classes) + ")");
  std::vector<int> classes(static_cast<std::size_t>(x.dim(0)), class_id);
  auto pass = training::reconstruct(*model_, x, classes, false);
  return {pass.x_hat, per_sample_mse(x, pass.x_hat)};
}

std::vector<std::vector<double>> DefensePipeline::slot_errors(const Tensor<float>& x) {
  const auto classes = model_->spec().classes;
  std::vector<std::vector<double>> out(static_cast<std::size_t>(x.dim(0)),
                                       std::vector<double>(static_cast<std::size_t>(classes)));
  for (int c = 0; c < classes; ++c) {
    auto rec = reconstruct_with_slot(x, c);
    for (std::size_t i = 0; i < out.size(); ++i) out[i][static_cast<std::size_t>(c)] = rec.errors[i];
  }
  return out;
}

attacks::LogitsFn DefensePipeline::logits_fn(std::vector<int> slots) {
  return [this, slots = std::move(slots)](const Tensor<float>& x) {
    if (!model_->uses_memory()) return training::defense_logits(*model_, x, {}, false);
    if (static_cast<std::int64_t>(slots.size()) != x.dim(0))
      throw ShapeError("pipeline logits: " + std::to_string(slots.size()) + " fixed slots for a batch of " +
                       std::to_string(x.dim(0)));
    return training::defense_logits(*model_, x, slots, false);
  };
}

attacks::AttackResult DefensePipeline::attack(const Tensor<float>& x, std::span<const int> labels,
                                              const attacks::AttackConfig& cfg) {
  std::vector<int> slots;
  if (model_->uses_memory()) slots = select(x);
  return attacks::run_attack(logits_fn(std::move(slots)), x, labels, cfg);
}

}  // namespace memdef::defense
