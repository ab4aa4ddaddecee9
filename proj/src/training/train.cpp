// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/training/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "memdef/data/batch.hpp"
#include "memdef/tensor/ops.hpp"

namespace memdef::training {
namespace {

using nlohmann::json;

void emit(const MetricsSink& sink, const json& record) {
  if (sink) sink(record);
}

bool grads_finite(const std::vector<Tensor<float>>& params) {
  for (const auto& p : params)
    for (float g : p.grad_data())
      if (!std::isfinite(g)) return false;
  return true;
}

void check_image_shape(const data::Dataset& ds, const nets::ImageSpec& image, const char* what) {
  if (ds.channels() != image.channels || ds.height() != image.height || ds.width() != image.width) {
    std::ostringstream msg;
    msg << what << ": dataset images are " << ds.channels() << "x" << ds.height() << "x" << ds.width()
        << " but the model expects " << image.channels << "x" << image.height << "x" << image.width;
    throw ShapeError(msg.str());
  }
}

// Endless shuffled stream of dataset rows; reshuffles at every wrap.
class RowCycler {
 public:
  RowCycler(std::int64_t size, std::uint64_t seed) : order_(static_cast<std::size_t>(size)), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::int64_t{0});
    rng_.shuffle(std::span<std::int64_t>(order_));
  }

  std::vector<std::int64_t> take(std::int64_t n) {
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(n));
    while (static_cast<std::int64_t>(out.size()) < n) {
      if (cursor_ == order_.size()) {
        rng_.shuffle(std::span<std::int64_t>(order_));
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::int64_t> order_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

Tensor<float> maybe_augment(const Tensor<float>& images, const data::AugmentPolicy& policy, Rng& rng) {
  return policy.any() ? data::augment(images, policy, rng) : images;
}

int count_correct(const Tensor<float>& logits, std::span<const int> labels) {
  auto predicted = argmax_rows(logits);
  int hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == labels[i];
  return hits;
}

// One supervised selector step; returns (loss, hits).
std::pair<double, int> selector_step(nets::ResidualSelector<float>& selector, Adam<float>& opt,
                                     const Tensor<float>& images, std::span<const int> labels,
                                     std::int64_t step) {
  opt.zero_grad();
  double loss_value = 0;
  int hits = 0;
  {
    GradTape<float> tape;
    auto logits = selector.forward(images, true);
    auto loss = cross_entropy(logits, labels);
    loss_value = loss.item();
    hits = count_correct(logits, labels);
    if (!std::isfinite(loss_value))
      throw TrainingDiverged("selector training diverged at step " + std::to_string(step) + ": loss " +
                             std::to_string(loss_value));
    tape.backward(loss);
  }
  if (!grads_finite(opt.params()))
    throw TrainingDiverged("selector training diverged at step " + std::to_string(step) + ": non-finite gradient");
  opt.step();
  return {loss_value, hits};
}

AdamConfig with_l2(const TrainPlan& plan) {
  auto cfg = plan.adam;
  cfg.weight_decay = plan.l2;
  return cfg;
}

}  // namespace

const char* stage_name(Stage stage) { return stage == Stage::kSelector ? "selector" : "defense"; }

void TrainPlan::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(adam.lr >= 0)) throw std::invalid_argument("learning rate must be >= 0");
  if (!(l2 >= 0)) throw std::invalid_argument("l2 coefficient must be >= 0");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  augment.validate();
}

DefenseTrainReport train_defense(DefenseModel& model, const data::Dataset& train, const TrainPlan& plan,
                                 const LossConfig& loss, const MetricsSink& sink) {
  plan.validate();
  loss.validate();
  check_image_shape(train, model.autoencoder().image, "train_defense");
  if (train.size() == 0) throw std::invalid_argument("train_defense: empty training set");

  std::vector<Tensor<float>> params, memory_params;
  for (const auto& item : model.tensors()) {
    if (!item.trainable) continue;
    (item.name.rfind("memory.", 0) == 0 ? memory_params : params).push_back(item.tensor);
  }
  Adam<float> opt(params, with_l2(plan));
  std::optional<Adam<float>> memory_opt;
  if (!memory_params.empty()) memory_opt.emplace(memory_params, plan.adam);

  Rng root(plan.seed);
  data::BatchIterator batches(train, plan.batch_size, root.next_u64());
  Rng aug_rng = root.fork();

  DefenseTrainReport report;
  data::Batch batch;
  bool capped = false;
  for (int epoch = 0; epoch < plan.epochs && !capped; ++epoch) {
    double loss_sum = 0, target_sum = 0, non_target_sum = 0, ce_sum = 0;
    std::int64_t seen = 0, hits = 0, epoch_steps = 0;
    while (batches.next(batch)) {
      auto input = maybe_augment(batch.images, plan.augment, aug_rng);
      opt.zero_grad();
      if (memory_opt) memory_opt->zero_grad();
      LossTerms terms;
      auto diverged = [&](const std::string& why) {
        std::ostringstream msg;
        msg << "defense training diverged at epoch " << epoch << " step " << report.steps << ": " << why
            << " (target " << terms.target << ", non-target " << terms.non_target << ", ce "
            << terms.cross_entropy << ", lr " << plan.adam.lr << ")";
        return TrainingDiverged(msg.str());
      };
      {
        GradTape<float> tape;
        try {
          terms = defense_objective(model, input, batch.images, batch.labels, loss);
        } catch (const NumericError& e) {
          throw diverged(e.what());
        }
        if (!std::isfinite(terms.loss.item())) throw diverged("loss is " + std::to_string(terms.loss.item()));
        tape.backward(terms.loss);
      }
      if (!grads_finite(params) || !grads_finite(memory_params)) throw diverged("non-finite gradient");
      opt.step();
      if (memory_opt) memory_opt->step();

      const auto n = static_cast<std::int64_t>(batch.labels.size());
      loss_sum += terms.loss.item() * n;
      target_sum += terms.target * n;
      non_target_sum += terms.non_target * n;
      ce_sum += terms.cross_entropy * n;
      hits += terms.correct;
      seen += n;
      ++epoch_steps;
      ++report.steps;
      report.last_loss = terms.loss.item();
      report.last_target = terms.target;
      if (plan.max_steps && report.steps >= plan.max_steps) {
        capped = true;
        break;
      }
    }
    batches.new_epoch();
    if (seen == 0) continue;
    const double inv = 1.0 / static_cast<double>(seen);
    emit(sink, json{{"stage", "defense"},
                    {"variant", variant_name(model.spec().variant)},
                    {"epoch", epoch},
                    {"step", report.steps},
                    {"batches", epoch_steps},
                    {"loss", loss_sum * inv},
                    {"target", target_sum * inv},
                    {"non_target", non_target_sum * inv},
                    {"cross_entropy", ce_sum * inv},
                    {"train_accuracy", static_cast<double>(hits) * inv}});
  }
  return report;
}

void recalibrate_batch_norm(nets::ResidualSelector<float>& selector, const data::Dataset& data,
                            std::int64_t batch_size, int passes) {
  FrozenParameters frozen;
  for (int pass = 0; pass < passes; ++pass) {
    for (std::int64_t begin = 0; begin < data.size(); begin += batch_size)
      selector.forward(slice_batch(data.images, begin, std::min(data.size(), begin + batch_size)), true);
  }
}

std::int64_t train_selector_benign(nets::ResidualSelector<float>& selector, const data::Dataset& train,
                                   const TrainPlan& plan, const MetricsSink& sink) {
  plan.validate();
  if (train.size() == 0) throw std::invalid_argument("train_selector: empty training set");
  TensorList<float> list;
  selector.collect("selector", list);
  Adam<float> opt(trainable_tensors(list), with_l2(plan));
  Rng root(plan.seed);
  data::BatchIterator batches(train, plan.batch_size, root.next_u64());
  Rng aug_rng = root.fork();

  std::int64_t steps = 0;
  data::Batch batch;
  bool capped = false;
  for (int epoch = 0; epoch < plan.epochs && !capped; ++epoch) {
    double loss_sum = 0;
    std::int64_t hits = 0, seen = 0;
    while (batches.next(batch)) {
      auto input = maybe_augment(batch.images, plan.augment, aug_rng);
      auto [loss, correct] = selector_step(selector, opt, input, batch.labels, steps);
      const auto n = static_cast<std::int64_t>(batch.labels.size());
      loss_sum += loss * n;
      hits += correct;
      seen += n;
      ++steps;
      if (plan.max_steps && steps >= plan.max_steps) {
        capped = true;
        break;
      }
    }
    batches.new_epoch();
    if (seen == 0) continue;
    emit(sink, json{{"stage", "selector"},
                    {"phase", "benign"},
                    {"epoch", epoch},
                    {"step", steps},
                    {"loss", loss_sum / seen},
                    {"train_accuracy", static_cast<double>(hits) / seen}});
  }
  recalibrate_batch_norm(selector, train, plan.batch_size);
  return steps;
}

attacks::AdversarialSet generate_adversarial(nets::ResidualSelector<float>& selector, const data::Dataset& source,
                                             const attacks::AttackConfig& attack, std::int64_t batch_size) {
  attack.validate();
  if (batch_size < 1) throw std::invalid_argument("attack batch size must be >= 1");
  attacks::LogitsFn model = [&selector](const Tensor<float>& x) { return selector.forward(x, false); };
  attacks::AdversarialSet set;
  set.sample_shape = {source.channels(), source.height(), source.width()};
  set.header_json = json{{"attack", attacks::attack_name(attack.kind)},
                         {"epsilon", attack.epsilon},
                         {"step_size", attack.step_size},
                         {"iterations", attack.iterations},
                         {"random_start", attack.random_start},
                         {"seed", attack.seed},
                         {"split", data::split_name(source.split)},
                         {"count", source.size()}}
                        .dump();
  const auto pixels = source.channels() * source.height() * source.width();
  for (std::int64_t begin = 0; begin < source.size(); begin += batch_size) {
    const auto end = std::min(source.size(), begin + batch_size);
    auto x = slice_batch(source.images, begin, end);
    std::span<const int> labels(source.labels.data() + begin, static_cast<std::size_t>(end - begin));
    auto cfg = attack;
    cfg.seed = attack.seed + static_cast<std::uint64_t>(begin);
    auto result = attacks::run_attack(model, x, labels, cfg);
    for (std::int64_t i = 0; i < end - begin; ++i) {
      attacks::AdversarialRecord rec;
      rec.index = static_cast<std::uint64_t>(begin + i);
      rec.label = labels[static_cast<std::size_t>(i)];
      const auto* d = result.delta.ptr() + i * pixels;
      rec.delta.assign(d, d + pixels);
      rec.success = result.success[static_cast<std::size_t>(i)] != 0;
      set.records.push_back(std::move(rec));
    }
  }
  return set;
}

data::Dataset materialize(const data::Dataset& source, const attacks::AdversarialSet& set, bool successful_only) {
  const Shape expected{source.channels(), source.height(), source.width()};
  if (set.sample_shape != expected)
    throw data::DataError("adversarial set sample shape " + shape_str(set.sample_shape) +
                          " does not match dataset " + shape_str(expected));
  const auto pixels = source.channels() * source.height() * source.width();
  std::vector<std::int64_t> rows;
  std::vector<const attacks::AdversarialRecord*> picked;
  for (const auto& rec : set.records) {
    if (successful_only && !rec.success) continue;
    if (rec.index >= static_cast<std::uint64_t>(source.size()))
      throw data::DataError("adversarial record index " + std::to_string(rec.index) + " outside dataset of " +
                            std::to_string(source.size()));
    if (source.labels[rec.index] != rec.label)
      throw data::DataError("adversarial record " + std::to_string(rec.index) + " has label " +
                            std::to_string(rec.label) + " but the dataset says " +
                            std::to_string(source.labels[rec.index]));
    if (static_cast<std::int64_t>(rec.delta.size()) != pixels)
      throw data::DataError("adversarial record " + std::to_string(rec.index) + " has the wrong delta size");
    rows.push_back(static_cast<std::int64_t>(rec.index));
    picked.push_back(&rec);
  }
  auto out = data::subset(source, rows);
  auto values = out.images.mutable_data();
  for (std::size_t r = 0; r < picked.size(); ++r) {
    auto* px = values.data() + static_cast<std::int64_t>(r) * pixels;
    for (std::int64_t i = 0; i < pixels; ++i) px[i] = std::clamp(px[i] + picked[r]->delta[i], 0.0f, 1.0f);
  }
  return out;
}

std::int64_t train_selector_mixture(nets::ResidualSelector<float>& selector, const data::Dataset& benign,
                                    const data::Dataset& adversarial, const TrainPlan& plan,
                                    const MetricsSink& sink) {
  plan.validate();
  if (plan.batch_size < 2) throw std::invalid_argument("mixture batches need batch size >= 2");
  if (adversarial.size() == 0) throw std::invalid_argument("train_selector: empty adversarial set");
  if (benign.size() == 0) throw std::invalid_argument("train_selector: empty benign set");
  TensorList<float> list;
  selector.collect("selector", list);
  Adam<float> opt(trainable_tensors(list), with_l2(plan));
  Rng root(plan.seed);
  data::BatchIterator adv_batches(adversarial, plan.batch_size / 2, root.next_u64());
  RowCycler benign_rows(benign.size(), root.next_u64());
  Rng aug_rng = root.fork();

  std::int64_t steps = 0;
  data::Batch adv;
  bool capped = false;
  for (int epoch = 0; epoch < plan.epochs && !capped; ++epoch) {
    double loss_sum = 0;
    std::int64_t hits = 0, seen = 0, adv_seen = 0;
    while (adv_batches.next(adv)) {
      const auto n_adv = static_cast<std::int64_t>(adv.labels.size());
      const auto n_benign = n_adv == plan.batch_size / 2 ? plan.batch_size - n_adv : n_adv;
      auto rows = benign_rows.take(n_benign);
      auto clean = data::subset(benign, rows);
      auto clean_images = maybe_augment(clean.images, plan.augment, aug_rng);
      std::vector<Tensor<float>> parts{adv.images, clean_images};
      auto images = concat_batch(std::span<const Tensor<float>>(parts));
      std::vector<int> labels = adv.labels;
      labels.insert(labels.end(), clean.labels.begin(), clean.labels.end());
      auto [loss, correct] = selector_step(selector, opt, images, labels, steps);
      const auto n = static_cast<std::int64_t>(labels.size());
      loss_sum += loss * n;
      hits += correct;
      seen += n;
      adv_seen += n_adv;
      ++steps;
      if (plan.max_steps && steps >= plan.max_steps) {
        capped = true;
        break;
      }
    }
    adv_batches.new_epoch();
    if (seen == 0) continue;
    emit(sink, json{{"stage", "selector"},
                    {"phase", "mixture"},
                    {"epoch", epoch},
                    {"step", steps},
                    {"loss", loss_sum / seen},
                    {"train_accuracy", static_cast<double>(hits) / seen},
                    {"adversarial_fraction", static_cast<double>(adv_seen) / seen}});
  }
  recalibrate_batch_norm(selector, benign, plan.batch_size);
  return steps;
}

double selector_accuracy(nets::ResidualSelector<float>& selector, const data::Dataset& dataset,
                         std::int64_t batch_size) {
  if (dataset.size() == 0) return 0.0;
  std::int64_t hits = 0;
  for (std::int64_t begin = 0; begin < dataset.size(); begin += batch_size) {
    const auto end = std::min(dataset.size(), begin + batch_size);
    auto logits = selector.forward(slice_batch(dataset.images, begin, end), false);
    hits += count_correct(logits, std::span<const int>(dataset.labels.data() + begin,
                                                       static_cast<std::size_t>(end - begin)));
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

SelectorReport train_selector(nets::ResidualSelector<float>& selector, const data::Dataset& train,
                              const SelectorPlan& plan, const MetricsSink& sink) {
  train_selector_benign(selector, train, plan.benign, sink);
  auto set = generate_adversarial(selector, train, plan.attack, plan.attack_batch);
  auto kept = materialize(train, set, true);
  SelectorReport report;
  report.attempted = static_cast<std::int64_t>(set.records.size());
  report.kept = kept.size();
  emit(sink, json{{"stage", "selector"}, {"phase", "attack"}, {"attempted", report.attempted}, {"kept", report.kept}});
  if (kept.size() == 0)
    throw std::runtime_error("train_selector: every " + std::string(attacks::attack_name(plan.attack.kind)) +
                             " attack failed; no adversarial examples to train on");
  report.adversarial_accuracy_before = selector_accuracy(selector, kept);
  train_selector_mixture(selector, train, kept, plan.mixture, sink);
  report.adversarial_accuracy_after = selector_accuracy(selector, kept);
  emit(sink, json{{"stage", "selector"},
                  {"phase", "summary"},
                  {"adversarial_accuracy_before", report.adversarial_accuracy_before},
                  {"adversarial_accuracy_after", report.adversarial_accuracy_after}});
  return report;
}

}  // namespace memdef::training
