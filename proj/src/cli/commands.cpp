// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "memdef/attacks/attacks.hpp"
#include "memdef/cli/config.hpp"
#include "memdef/data/dataset.hpp"
#include "memdef/defense/pipeline.hpp"
#include "memdef/io/binary.hpp"
#include "memdef/io/checkpoint.hpp"
#include "memdef/tensor/ops.hpp"
#include "memdef/training/train.hpp"

namespace memdef::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nets::DatasetKind;
using training::DefenseModel;
using training::Variant;
using Selector = nets::ResidualSelector<float>;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

class Context {
 public:
  Context(std::string command, RunConfig cfg, std::ostream& out, std::ostream& err)
      : command(std::move(command)), cfg(std::move(cfg)), out(out), err(err) {
    try {
      kind = nets::parse_dataset_kind(this->cfg.str("dataset"));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  json provenance() const { return json{{"command", command}, {"config", cfg.echo()}}; }

  std::string in_output_dir(const std::string& name) const {
    return (fs::path(cfg.str("output_dir")) / name).string();
  }
  /// Value of a path key, or `<output_dir>/<fallback>`.
  std::string path(const std::string& key, const std::string& fallback) const {
    return cfg.has(key) ? cfg.str(key) : in_output_dir(fallback);
  }
  std::string output(const std::string& fallback) const { return path("out", fallback); }

  /// Deterministic per-purpose seed derived from the base seed.
  std::uint64_t seed_for(const std::string& tag) const {
    const auto base = static_cast<std::uint64_t>(cfg.integer("seed"));
    return io::fnv1a({reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size()},
                     0xcbf29ce484222325ULL ^ (base * 0x9e3779b97f4a7c15ULL));
  }

  std::string command;
  RunConfig cfg;
  DatasetKind kind = DatasetKind::kFashionMnist;
  std::ostream& out;
  std::ostream& err;
};

std::string csv_header(const Context& ctx) { return "# config: " + ctx.provenance().dump() + "\n"; }

class JsonLines {
 public:
  explicit JsonLines(const Context& ctx) { add(json{{"provenance", ctx.provenance()}}); }
  void add(const json& record) { text_ += record.dump() + "\n"; }
  training::MetricsSink sink() {
    return [this](const json& j) { add(j); };
  }
  void save(const std::string& path) const { io::write_text_file(path, text_); }

 private:
  std::string text_;
};

std::string metrics_path(const std::string& artifact) {
  fs::path p(artifact);
  p.replace_extension(".metrics.jsonl");
  return p.string();
}

void require_file(const std::string& path, const std::string& key) {
  if (!fs::exists(path)) throw UsageError("checkpoint or input '" + path + "' not found (set " + key + ")");
}

// --- data -------------------------------------------------------------------

std::string idx_path(const std::string& dir, const std::string& stem) {
  const auto plain = (fs::path(dir) / stem).string();
  return fs::exists(plain + ".gz") ? plain + ".gz" : plain;
}

data::Dataset load_split(const Context& ctx, data::Split split) {
  const auto dir = ctx.cfg.str("data_dir");
  data::Dataset ds;
  if (ctx.kind == DatasetKind::kFashionMnist) {
    const std::string prefix = split == data::Split::kTrain ? "train" : "t10k";
    ds = data::load_idx(idx_path(dir, prefix + "-images-idx3-ubyte"), idx_path(dir, prefix + "-labels-idx1-ubyte"),
                        split);
  } else {
    ds = data::load_cifar_batches(dir, split);
  }
  const auto per_class = ctx.cfg.integer(split == data::Split::kTrain ? "train_per_class" : "test_per_class");
  if (per_class < 0) throw UsageError("per-class counts must be >= 0");
  if (per_class > 0) ds = data::take_per_class(ds, per_class);
  const auto image = nets::image_spec(ctx.kind);
  if (ds.channels() != image.channels || ds.height() != image.height || ds.width() != image.width)
    throw std::runtime_error("data in '" + dir + "' does not have the " + nets::dataset_name(ctx.kind) +
                             " image shape");
  return ds;
}

data::Split parse_split(const std::string& name) {
  if (name == "train") return data::Split::kTrain;
  if (name == "test") return data::Split::kTest;
  throw UsageError("split must be train or test, got '" + name + "'");
}

// --- models -----------------------------------------------------------------

nets::SelectorSpec selector_spec(const Context& ctx) {
  nets::SelectorSpec spec;
  spec.widths = ctx.cfg.integers("selector_widths");
  spec.blocks.clear();
  for (auto b : ctx.cfg.integers("selector_blocks")) spec.blocks.push_back(static_cast<int>(b));
  if (spec.widths.empty() || spec.widths.size() != spec.blocks.size())
    throw UsageError("selector_widths and selector_blocks must be non-empty lists of equal length");
  return spec;
}

json selector_metadata(const Context& ctx, const nets::SelectorSpec& spec, const std::string& phase) {
  return json{{"kind", "selector"},   {"dataset", nets::dataset_name(ctx.kind)},
              {"widths", spec.widths}, {"blocks", spec.blocks},
              {"classes", spec.classes}, {"phase", phase},
              {"provenance", ctx.provenance()}};
}

void check_dataset(const Context& ctx, const json& meta, const std::string& path) {
  const auto stored = meta.value("dataset", std::string());
  if (stored != nets::dataset_name(ctx.kind))
    throw std::runtime_error("checkpoint/dataset mismatch: '" + path + "' was trained on '" + stored +
                             "' but the config selects '" + nets::dataset_name(ctx.kind) + "'");
}

std::unique_ptr<Selector> load_selector(const Context& ctx, const std::string& path) {
  require_file(path, "selector_ckpt");
  auto ck = io::read_checkpoint(path);
  if (ck.metadata.value("kind", std::string()) != "selector")
    throw std::runtime_error("'" + path + "' is not a selector checkpoint");
  check_dataset(ctx, ck.metadata, path);
  nets::SelectorSpec spec;
  spec.widths = ck.metadata.at("widths").get<std::vector<std::int64_t>>();
  spec.blocks = ck.metadata.at("blocks").get<std::vector<int>>();
  spec.classes = ck.metadata.at("classes").get<int>();
  Rng rng(0);
  auto selector = std::make_unique<Selector>(nets::image_spec(ctx.kind), spec, rng);
  TensorList<float> list;
  selector->collect("selector", list);
  io::load_tensors(ck, list);
  return selector;
}

void save_selector(const Context& ctx, Selector& selector, const nets::SelectorSpec& spec, const std::string& phase,
                   const std::string& path) {
  TensorList<float> list;
  selector.collect("selector", list);
  io::write_checkpoint(path, selector_metadata(ctx, spec, phase), list);
}

training::DefenseSpec defense_spec(const Context& ctx, Variant variant) {
  training::DefenseSpec spec;
  spec.dataset = ctx.kind;
  spec.variant = variant;
  spec.memory_slots = ctx.cfg.str("memory_slots") == "auto" ? training::default_memory_slots(ctx.kind)
                                                            : ctx.cfg.integer("memory_slots");
  spec.shrink.phi = ctx.cfg.number("phi");
  spec.shrink.enabled = ctx.cfg.flag("shrink");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

json defense_metadata(const Context& ctx, const training::DefenseSpec& spec) {
  return json{{"kind", "defense"},
              {"dataset", nets::dataset_name(spec.dataset)},
              {"variant", training::variant_name(spec.variant)},
              {"memory_slots", spec.memory_slots},
              {"phi", spec.shrink.phi},
              {"shrink", spec.shrink.enabled},
              {"classes", spec.classes},
              {"provenance", ctx.provenance()}};
}

std::unique_ptr<DefenseModel> load_defense(const Context& ctx, const std::string& path, const std::string& key) {
  require_file(path, key);
  auto ck = io::read_checkpoint(path);
  if (ck.metadata.value("kind", std::string()) != "defense")
    throw std::runtime_error("'" + path + "' is not a defense checkpoint");
  check_dataset(ctx, ck.metadata, path);
  training::DefenseSpec spec;
  spec.dataset = ctx.kind;
  spec.variant = training::parse_variant(ck.metadata.at("variant").get<std::string>());
  spec.memory_slots = ck.metadata.at("memory_slots").get<std::int64_t>();
  spec.shrink.phi = ck.metadata.at("phi").get<double>();
  spec.shrink.enabled = ck.metadata.at("shrink").get<bool>();
  spec.classes = ck.metadata.at("classes").get<int>();
  auto model = std::make_unique<DefenseModel>(spec, 0);
  io::load_tensors(ck, model->tensors());
  return model;
}

// --- plans ------------------------------------------------------------------

data::AugmentPolicy selector_augment(const Context& ctx) {
  data::AugmentPolicy policy;
  for (const auto& name : ctx.cfg.strings("selector_augment")) {
    if (name == "crop") {
      policy.random_crop = true;
    } else if (name == "hflip") {
      policy.horizontal_flip = true;
    } else if (name == "vflip") {
      policy.vertical_flip = true;
    } else if (name == "erase") {
      policy.random_erase = true;
    } else if (name != "none") {
      throw UsageError("unknown augmentation '" + name + "'");
    }
  }
  return policy;
}

training::TrainPlan selector_plan(const Context& ctx, const std::string& phase) {
  training::TrainPlan plan;
  plan.stage = training::Stage::kSelector;
  plan.epochs = static_cast<int>(ctx.cfg.integer(phase == "benign" ? "selector_benign_epochs"
                                                                   : "selector_mixture_epochs"));
  plan.batch_size = ctx.cfg.integer("batch_size");
  plan.adam.lr = ctx.cfg.number("selector_lr");
  plan.augment = selector_augment(ctx);
  plan.seed = ctx.seed_for("selector-" + phase);
  return plan;
}

double l2_coefficient(const Context& ctx) {
  if (ctx.cfg.str("l2") != "auto") return ctx.cfg.number("l2");
  return ctx.kind == DatasetKind::kCifar10 ? 1e-5 : 0.0;
}

training::TrainPlan defense_plan(const Context& ctx, int epochs) {
  training::TrainPlan plan;
  plan.stage = training::Stage::kDefense;
  plan.epochs = epochs;
  plan.batch_size = ctx.cfg.integer("batch_size");
  plan.adam.lr = ctx.cfg.number("lr");
  plan.augment.noise_std = ctx.cfg.number("noise_std");
  plan.l2 = l2_coefficient(ctx);
  plan.seed = ctx.seed_for("defense-train");
  return plan;
}

training::LossConfig loss_config(const Context& ctx) {
  training::LossConfig loss;
  loss.alpha = ctx.cfg.number("alpha");
  loss.beta = ctx.cfg.number("beta");
  loss.gamma = ctx.cfg.number("gamma");
  return loss;
}

attacks::AttackConfig adversarial_attack(const Context& ctx) {
  auto kind = attacks::parse_attack_kind(ctx.cfg.str("adv_attack"));
  auto cfg = attacks::default_attack_config(kind, ctx.cfg.number("adv_epsilon"));
  cfg.step_size = ctx.cfg.number("adv_step_size");
  cfg.iterations = static_cast<int>(ctx.cfg.integer("adv_iterations"));
  cfg.seed = ctx.seed_for("adv-" + ctx.cfg.str("adv_attack"));
  return cfg;
}

attacks::AttackConfig eval_attack(const Context& ctx, attacks::AttackKind kind, double eps) {
  auto cfg = attacks::default_attack_config(kind, eps);
  switch (kind) {
    case attacks::AttackKind::kBim:
      cfg.iterations = static_cast<int>(ctx.cfg.integer("bim_iterations"));
      cfg.step_size = ctx.cfg.str("bim_step_size") == "auto" ? eps / std::max(cfg.iterations, 1)
                                                             : ctx.cfg.number("bim_step_size");
      break;
    case attacks::AttackKind::kPgd:
      cfg.iterations = static_cast<int>(ctx.cfg.integer("pgd_iterations"));
      cfg.step_size = ctx.cfg.str("pgd_step_size") == "auto" ? eps / 4 : ctx.cfg.number("pgd_step_size");
      break;
    case attacks::AttackKind::kCw:
      cfg.cw_iterations = static_cast<int>(ctx.cfg.integer("cw_iterations"));
      cfg.cw_binary_steps = static_cast<int>(ctx.cfg.integer("cw_binary_steps"));
      cfg.cw_lr = ctx.cfg.number("cw_lr");
      cfg.cw_kappa = ctx.cfg.number("cw_kappa");
      cfg.cw_initial_c = ctx.cfg.number("cw_initial_c");
      break;
    case attacks::AttackKind::kFgsm:
      break;
  }
  cfg.seed = ctx.seed_for(std::string("eval-") + attacks::attack_name(kind));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

std::vector<double> eval_epsilons(const Context& ctx) {
  if (ctx.cfg.str("epsilons") != "auto") return ctx.cfg.numbers("epsilons");
  if (ctx.kind == DatasetKind::kCifar10) return {2.0 / 255, 8.0 / 255, 16.0 / 255};
  return {9.0 / 255, 25.0 / 255};
}

// --- evaluation targets -----------------------------------------------------

/// Something that can be attacked and then asked for labels.
struct Target {
  std::function<attacks::AttackResult(const Tensor<float>&, std::span<const int>, const attacks::AttackConfig&)>
      attack;
  std::function<std::vector<defense::DefenseVerdict>(const Tensor<float>&)> classify;
};

Target pipeline_target(defense::DefensePipeline& pipe) {
  return {[&pipe](const Tensor<float>& x, std::span<const int> y, const attacks::AttackConfig& cfg) {
            return pipe.attack(x, y, cfg);
          },
          [&pipe](const Tensor<float>& x) { return pipe.classify(x); }};
}

Target selector_target(Selector& selector) {
  return {[&selector](const Tensor<float>& x, std::span<const int> y, const attacks::AttackConfig& cfg) {
            return attacks::run_attack([&selector](const Tensor<float>& v) { return selector.forward(v, false); },
                                       x, y, cfg);
          },
          [&selector](const Tensor<float>& x) {
            auto classes = nets::selector_predict(selector, x).classes;
            std::vector<defense::DefenseVerdict> out(classes.size());
            for (std::size_t i = 0; i < classes.size(); ++i) out[i].final_class = out[i].selector_class = classes[i];
            return out;
          }};
}

/// Classifier-B of a defense model applied to raw pixels.
Target raw_classifier_target(DefenseModel& model) {
  return {[&model](const Tensor<float>& x, std::span<const int> y, const attacks::AttackConfig& cfg) {
            return attacks::run_attack([&model](const Tensor<float>& v) { return model.classifier.forward(v); }, x,
                                       y, cfg);
          },
          [&model](const Tensor<float>& x) {
            auto classes = nets::target_classify(model.classifier, x).classes;
            std::vector<defense::DefenseVerdict> out(classes.size());
            for (std::size_t i = 0; i < classes.size(); ++i) out[i].final_class = classes[i];
            return out;
          }};
}

struct Score {
  double accuracy = 0.0;
  std::vector<double> errors;  // reconstruction error per sample
};

/// Accuracy on `ds`, optionally after attacking each batch.
Score score(Target& target, const data::Dataset& ds, const attacks::AttackConfig* attack, std::int64_t batch) {
  Score s;
  std::int64_t hits = 0;
  for (std::int64_t begin = 0; begin < ds.size(); begin += batch) {
    const auto end = std::min(ds.size(), begin + batch);
    auto x = slice_batch(ds.images, begin, end);
    std::span<const int> labels(ds.labels.data() + begin, static_cast<std::size_t>(end - begin));
    if (attack) {
      auto cfg = *attack;
      cfg.seed = attack->seed + static_cast<std::uint64_t>(begin);
      x = target.attack(x, labels, cfg).x_adv;
    }
    auto verdicts = target.classify(x);
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      hits += verdicts[i].final_class == labels[i];
      s.errors.push_back(verdicts[i].reconstruction_error);
    }
  }
  s.accuracy = ds.size() ? static_cast<double>(hits) / static_cast<double>(ds.size()) : 0.0;
  return s;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// --- commands ---------------------------------------------------------------

json split_manifest(const data::Dataset& ds) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(ds.class_count), 0);
  for (int y : ds.labels) ++counts[static_cast<std::size_t>(y)];
  io::BinaryWriter w;
  w.f32s(ds.images.data());
  for (int y : ds.labels) w.i32(y);
  double total = 0;
  for (float v : ds.images.data()) total += v;
  return json{{"count", ds.size()},
              {"class_counts", counts},
              {"shape", {ds.channels(), ds.height(), ds.width()}},
              {"pixel_mean", ds.images.numel() ? total / static_cast<double>(ds.images.numel()) : 0.0},
              {"fnv1a", io::fnv1a(w.buffer())}};
}

int cmd_prep_data(Context& ctx) {
  auto train = load_split(ctx, data::Split::kTrain);
  auto test = load_split(ctx, data::Split::kTest);
  data::validate(train);
  data::validate(test);
  json manifest{{"dataset", nets::dataset_name(ctx.kind)},
                {"train", split_manifest(train)},
                {"test", split_manifest(test)},
                {"provenance", ctx.provenance()}};
  const auto path = ctx.output("data_manifest.json");
  io::write_text_file(path, manifest.dump(2) + "\n");
  ctx.out << nets::dataset_name(ctx.kind) << ": " << train.size() << " train, " << test.size()
          << " test images; manifest " << path << "\n";
  return kExitOk;
}

int cmd_train_selector(Context& ctx) {
  const auto phase = ctx.cfg.str("phase");
  if (phase != "all" && phase != "benign" && phase != "mixture")
    throw UsageError("phase must be all, benign or mixture, got '" + phase + "'");
  auto train = load_split(ctx, data::Split::kTrain);
  JsonLines metrics(ctx);
  const auto batch = ctx.cfg.integer("eval_batch");

  std::unique_ptr<Selector> selector;
  nets::SelectorSpec spec;
  std::string out_path;
  if (phase == "mixture") {
    selector = load_selector(ctx, ctx.path("selector_ckpt", "selector_benign.mdef"));
    TensorList<float> unused;
    const auto ck = io::read_checkpoint(ctx.path("selector_ckpt", "selector_benign.mdef"));
    spec.widths = ck.metadata.at("widths").get<std::vector<std::int64_t>>();
    spec.blocks = ck.metadata.at("blocks").get<std::vector<int>>();
    if (!ctx.cfg.has("adv_file")) throw UsageError("phase mixture needs adv_file (from gen-adv)");
    require_file(ctx.cfg.str("adv_file"), "adv_file");
    auto set = attacks::read_adversarial_set(ctx.cfg.str("adv_file"));
    auto kept = training::materialize(train, set, true);
    if (kept.size() == 0) throw std::runtime_error("adversarial file holds no successful examples");
    training::train_selector_mixture(*selector, train, kept, selector_plan(ctx, "mixture"), metrics.sink());
    out_path = ctx.output("selector.mdef");
  } else {
    spec = selector_spec(ctx);
    Rng rng(ctx.seed_for("selector-init"));
    selector = std::make_unique<Selector>(nets::image_spec(ctx.kind), spec, rng);
    training::train_selector_benign(*selector, train, selector_plan(ctx, "benign"), metrics.sink());
    if (phase == "benign") {
      out_path = ctx.output("selector_benign.mdef");
    } else {
      save_selector(ctx, *selector, spec, "benign", ctx.in_output_dir("selector_benign.mdef"));
      const auto attack = adversarial_attack(ctx);
      auto test = load_split(ctx, data::Split::kTest);
      auto held = training::materialize(test, training::generate_adversarial(*selector, test, attack, batch), false);
      const double before = training::selector_accuracy(*selector, held);
      const double clean_before = training::selector_accuracy(*selector, test);
      auto set = training::generate_adversarial(*selector, train, attack, batch);
      auto kept = training::materialize(train, set, true);
      metrics.add(json{{"stage", "selector"},
                       {"phase", "attack"},
                       {"attempted", set.records.size()},
                       {"kept", kept.size()}});
      if (kept.size() == 0)
        throw std::runtime_error("every adversarial attack failed; no adversarial examples to train on");
      training::train_selector_mixture(*selector, train, kept, selector_plan(ctx, "mixture"), metrics.sink());
      const double after = training::selector_accuracy(*selector, held);
      const double clean_after = training::selector_accuracy(*selector, test);
      metrics.add(json{{"stage", "selector"},
                       {"phase", "heldout"},
                       {"count", held.size()},
                       {"adversarial_accuracy_before", before},
                       {"adversarial_accuracy_after", after},
                       {"clean_accuracy_before", clean_before},
                       {"clean_accuracy_after", clean_after}});
      ctx.out << "held-out " << attacks::attack_name(attack.kind) << " accuracy: " << num(before) << " -> "
              << num(after) << " (clean " << num(clean_before) << " -> " << num(clean_after) << ")\n";
      out_path = ctx.output("selector.mdef");
    }
  }
  save_selector(ctx, *selector, spec, phase == "benign" ? "benign" : "mixture", out_path);
  metrics.save(metrics_path(out_path));
  ctx.out << "selector checkpoint " << out_path << "\n";
  return kExitOk;
}

int cmd_gen_adv(Context& ctx) {
  const auto ckpt = ctx.path("selector_ckpt", "selector_benign.mdef");
  auto selector = load_selector(ctx, ckpt);
  const auto split_name = ctx.cfg.str("adv_split");
  auto ds = load_split(ctx, parse_split(split_name));
  const auto attack = adversarial_attack(ctx);
  auto set = training::generate_adversarial(*selector, ds, attack, ctx.cfg.integer("eval_batch"));
  auto header = json::parse(set.header_json);
  header["provenance"] = ctx.provenance();
  header["selector_ckpt"] = ckpt;
  set.header_json = header.dump();
  const auto path = ctx.output("adv_" + split_name + ".mdad");
  attacks::write_adversarial_set(path, set);
  std::int64_t ok = 0;
  for (const auto& r : set.records) ok += r.success;
  ctx.out << "wrote " << set.records.size() << " records (" << ok << " successful) to " << path << "\n";
  return kExitOk;
}

int cmd_train_defense(Context& ctx) {
  Variant variant;
  try {
    variant = training::parse_variant(ctx.cfg.str("variant"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  auto spec = defense_spec(ctx, variant);
  auto train = load_split(ctx, data::Split::kTrain);
  DefenseModel model(spec, ctx.seed_for("defense-init"));
  JsonLines metrics(ctx);
  auto report = training::train_defense(model, train, defense_plan(ctx, static_cast<int>(ctx.cfg.integer("defense_epochs"))),
                                        loss_config(ctx), metrics.sink());
  const auto path = ctx.output(std::string("defense_") + training::variant_name(variant) + ".mdef");
  io::write_checkpoint(path, defense_metadata(ctx, spec), model.tensors());
  metrics.save(metrics_path(path));
  ctx.out << training::variant_name(variant) << ": " << report.steps << " steps, last loss "
          << num(report.last_loss) << "; checkpoint " << path << "\n";
  return kExitOk;
}

int cmd_eval(Context& ctx) {
  auto model = load_defense(ctx, ctx.path("model_ckpt", "defense_full.mdef"), "model_ckpt");
  std::unique_ptr<Selector> selector;
  if (model->uses_memory()) selector = load_selector(ctx, ctx.path("selector_ckpt", "selector.mdef"));
  defense::DefensePipeline pipe(*model, selector.get());
  auto defended = pipeline_target(pipe);

  std::unique_ptr<DefenseModel> bare_model;
  std::unique_ptr<defense::DefensePipeline> bare_pipe;
  Target bare;
  if (ctx.cfg.has("bare_ckpt")) {
    bare_model = load_defense(ctx, ctx.cfg.str("bare_ckpt"), "bare_ckpt");
    bare_pipe = std::make_unique<defense::DefensePipeline>(*bare_model, nullptr);
    bare = pipeline_target(*bare_pipe);
  } else {
    bare = raw_classifier_target(*model);
  }

  auto test = load_split(ctx, data::Split::kTest);
  const auto batch = ctx.cfg.integer("eval_batch");
  std::string csv = csv_header(ctx) +
                    "attack,epsilon,defense_accuracy,bare_accuracy,mean_reconstruction_error,monotone_flag\n";
  auto clean = score(defended, test, nullptr, batch);
  const double bare_clean = score(bare, test, nullptr, batch).accuracy;
  csv += "clean,0," + num(clean.accuracy) + "," + num(bare_clean) + "," + num(mean(clean.errors)) + ",-\n";

  for (const auto& name : ctx.cfg.strings("attacks")) {
    attacks::AttackKind kind;
    try {
      kind = attacks::parse_attack_kind(name);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if (kind == attacks::AttackKind::kCw) {
      auto cfg = eval_attack(ctx, kind, 0.0);
      auto d = score(defended, test, &cfg, batch);
      auto b = score(bare, test, &cfg, batch);
      csv += "cw,," + num(d.accuracy) + "," + num(b.accuracy) + "," + num(mean(d.errors)) + ",-\n";
      continue;
    }
    auto eps = eval_epsilons(ctx);
    std::ranges::sort(eps);
    double previous = bare_clean;
    for (double e : eps) {
      auto cfg = eval_attack(ctx, kind, e);
      auto d = score(defended, test, &cfg, batch);
      auto b = score(bare, test, &cfg, batch);
      const bool monotone = b.accuracy <= previous;
      if (!monotone)
        ctx.err << "warning: bare accuracy under " << name << " rises from " << num(previous) << " to "
                << num(b.accuracy) << " at epsilon " << num(e) << "\n";
      previous = b.accuracy;
      csv += std::string(attacks::attack_name(kind)) + "," + num(e) + "," + num(d.accuracy) + "," +
             num(b.accuracy) + "," + num(mean(d.errors)) + "," + (monotone ? "ok" : "violation") + "\n";
    }
  }
  const auto path = ctx.output(std::string("eval_") + training::variant_name(model->spec().variant) + ".csv");
  io::write_text_file(path, csv);
  ctx.out << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_ablate(Context& ctx) {
  for (const char* key : {"bare_ckpt", "nomem_ckpt", "full_ckpt", "selector_ckpt"})
    if (!ctx.cfg.has(key)) throw UsageError(std::string("ablate needs ") + key);
  auto bare = load_defense(ctx, ctx.cfg.str("bare_ckpt"), "bare_ckpt");
  auto nomem = load_defense(ctx, ctx.cfg.str("nomem_ckpt"), "nomem_ckpt");
  auto full = load_defense(ctx, ctx.cfg.str("full_ckpt"), "full_ckpt");
  auto selector = load_selector(ctx, ctx.cfg.str("selector_ckpt"));
  const std::pair<DefenseModel*, Variant> expected[] = {
      {bare.get(), Variant::kBare}, {nomem.get(), Variant::kNoMemory}, {full.get(), Variant::kFull}};
  for (const auto& [model, variant] : expected)
    if (model->spec().variant != variant)
      throw UsageError(std::string("checkpoint given for the ") + training::variant_name(variant) +
                       " variant holds the " + training::variant_name(model->spec().variant) + " variant");

  defense::DefensePipeline bare_pipe(*bare, nullptr), nomem_pipe(*nomem, nullptr), full_pipe(*full, selector.get());
  std::vector<std::pair<std::string, Target>> rows = {{"bare", pipeline_target(bare_pipe)},
                                                      {"nomem", pipeline_target(nomem_pipe)},
                                                      {"selector", selector_target(*selector)},
                                                      {"full", pipeline_target(full_pipe)}};
  auto test = load_split(ctx, data::Split::kTest);
  const auto batch = ctx.cfg.integer("eval_batch");
  const auto fgsm = eval_attack(ctx, attacks::AttackKind::kFgsm, ctx.cfg.number("ablation_epsilon"));
  std::string csv = csv_header(ctx) + "variant,clean,fgsm\n";
  for (auto& [name, target] : rows) {
    const double clean = score(target, test, nullptr, batch).accuracy;
    const double attacked = score(target, test, &fgsm, batch).accuracy;
    csv += name + "," + num(clean) + "," + num(attacked) + "\n";
    ctx.out << name << ": clean " << num(clean) << ", fgsm " << num(attacked) << "\n";
  }
  const auto path = ctx.output("ablation.csv");
  io::write_text_file(path, csv);
  ctx.out << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_sweep_memory(Context& ctx) {
  std::vector<std::int64_t> sizes;
  for (auto s : ctx.cfg.integers("sweep_sizes")) {
    if (s <= 0 || s % 10 != 0) throw UsageError("memory size " + std::to_string(s) + " is not a positive multiple of 10");
    if (std::ranges::find(sizes, s) != sizes.end()) {
      ctx.err << "warning: duplicate memory size " << s << " ignored\n";
      continue;
    }
    sizes.push_back(s);
  }
  if (sizes.empty()) throw UsageError("sweep_sizes is empty");
  auto selector = load_selector(ctx, ctx.path("selector_ckpt", "selector.mdef"));
  auto train = load_split(ctx, data::Split::kTrain);
  auto test = load_split(ctx, data::Split::kTest);
  const auto batch = ctx.cfg.integer("eval_batch");
  const auto fgsm = eval_attack(ctx, attacks::AttackKind::kFgsm, ctx.cfg.number("sweep_epsilon"));
  JsonLines metrics(ctx);
  std::string csv = csv_header(ctx) +
                    "memory_slots,p99_benign_error,p99_adversarial_error,mean_benign_error,mean_adversarial_error,"
                    "error_gap\n";
  for (auto s : sizes) {
    ctx.cfg.set("memory_slots", std::to_string(s));
    auto spec = defense_spec(ctx, Variant::kFull);
    DefenseModel model(spec, ctx.seed_for("defense-init"));
    training::train_defense(model, train, defense_plan(ctx, static_cast<int>(ctx.cfg.integer("sweep_epochs"))),
                            loss_config(ctx), [&](const json& j) {
                              auto rec = j;
                              rec["memory_slots"] = s;
                              metrics.add(rec);
                            });
    defense::DefensePipeline pipe(model, selector.get());
    auto target = pipeline_target(pipe);
    auto benign = score(target, test, nullptr, batch);
    auto adversarial = score(target, test, &fgsm, batch);
    const double p99b = nearest_rank_percentile(benign.errors, 99);
    const double p99a = nearest_rank_percentile(adversarial.errors, 99);
    const double gap = mean(adversarial.errors) - mean(benign.errors);
    csv += std::to_string(s) + "," + num(p99b) + "," + num(p99a) + "," + num(mean(benign.errors)) + "," +
           num(mean(adversarial.errors)) + "," + num(gap) + "\n";
    ctx.out << "S=" << s << ": p99 benign " << num(p99b) << ", gap " << num(gap) << "\n";
  }
  const auto path = ctx.output("sweep_memory.csv");
  io::write_text_file(path, csv);
  metrics.save(metrics_path(path));
  ctx.out << "wrote " << path << "\n";
  return kExitOk;
}

int cmd_dump_latent(Context& ctx) {
  auto model = load_defense(ctx, ctx.path("model_ckpt", "defense_full.mdef"), "model_ckpt");
  if (!model->uses_autoencoder()) throw std::runtime_error("the bare variant has no latent space");
  const auto split_name = ctx.cfg.str("split");
  auto ds = load_split(ctx, parse_split(split_name));
  const auto batch = ctx.cfg.integer("eval_batch");
  const auto d = model->autoencoder().latent_dim;
  std::string csv = csv_header(ctx) + "label";
  for (std::int64_t k = 0; k < d; ++k) csv += ",z" + std::to_string(k);
  csv += "\n";
  char buf[32];
  for (std::int64_t begin = 0; begin < ds.size(); begin += batch) {
    const auto end = std::min(ds.size(), begin + batch);
    auto z = model->encoder.forward(slice_batch(ds.images, begin, end), false);
    for (std::int64_t r = 0; r < end - begin; ++r) {
      csv += std::to_string(ds.labels[static_cast<std::size_t>(begin + r)]);
      for (std::int64_t k = 0; k < d; ++k) {
        std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(z.ptr()[r * d + k]));
        csv += buf;
      }
      csv += "\n";
    }
  }
  const auto path = ctx.output("latent_" + split_name + ".csv");
  io::write_text_file(path, csv);
  ctx.out << "wrote " << ds.size() << " rows to " << path << "\n";
  return kExitOk;
}

std::string hardware_string() {
  std::string model = "unknown cpu";
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) model = line.substr(colon + 2);
      break;
    }
  }
  return model + ", " + std::to_string(std::thread::hardware_concurrency()) + " hardware threads";
}

int cmd_benchmark(Context& ctx) {
  const auto batches = ctx.cfg.integer("benchmark_batches");
  if (batches <= 0) throw UsageError("benchmark_batches must be >= 1");
  auto model = load_defense(ctx, ctx.path("model_ckpt", "defense_full.mdef"), "model_ckpt");
  if (!model->uses_memory()) throw UsageError("benchmark needs a full-variant checkpoint");
  auto selector = load_selector(ctx, ctx.path("selector_ckpt", "selector.mdef"));
  defense::DefensePipeline pipe(*model, selector.get());
  auto test = load_split(ctx, data::Split::kTest);
  if (test.size() < 10) throw std::runtime_error("benchmark needs at least 10 test images");
  auto x = slice_batch(test.images, 0, 10);

  using Clock = std::chrono::steady_clock;
  auto nomem_path = [&] {
    return model->classifier.forward(model->decoder.forward(model->encoder.forward(x, false), false));
  };
  nomem_path();
  pipe.classify(x);
  double nomem_total = 0, full_total = 0;
  defense::StageLatency stages;
  for (std::int64_t i = 0; i < batches; ++i) {
    auto t0 = Clock::now();
    nomem_path();
    nomem_total += std::chrono::duration<double>(Clock::now() - t0).count();
    t0 = Clock::now();
    auto verdicts = pipe.classify(x);
    full_total += std::chrono::duration<double>(Clock::now() - t0).count();
    stages.selector += verdicts[0].latency.selector * 10;
    stages.reconstruct += verdicts[0].latency.reconstruct * 10;
    stages.classify += verdicts[0].latency.classify * 10;
  }
  const double n = static_cast<double>(batches);
  json report{{"hardware", hardware_string()},
              {"batches", batches},
              {"batch_images", 10},
              {"mean_seconds_nomem_path", nomem_total / n},
              {"mean_seconds_full_path", full_total / n},
              {"memory_overhead_seconds", (full_total - nomem_total) / n},
              {"mean_seconds_selector", stages.selector / n},
              {"mean_seconds_reconstruct", stages.reconstruct / n},
              {"mean_seconds_classify", stages.classify / n},
              {"wall_clock_fields", "all mean_* and memory_overhead_seconds"},
              {"provenance", ctx.provenance()}};
  const auto path = ctx.output("benchmark.json");
  io::write_text_file(path, report.dump(2) + "\n");
  ctx.out << "hardware: " << report["hardware"].get<std::string>() << "\n"
          << "per batch of 10: nomem " << num(nomem_total / n) << " s, full " << num(full_total / n)
          << " s, overhead " << num((full_total - nomem_total) / n) << " s\n";
  return kExitOk;
}

struct CommandInfo {
  const char* name;
  const char* help;
  int (*run)(Context&);
};

const CommandInfo kCommands[] = {
    {"prep-data", "validate the dataset subsets and write a manifest", cmd_prep_data},
    {"train-selector", "stage 1: benign then adversarial-mixture training of the selector", cmd_train_selector},
    {"gen-adv", "attack the selector and write an adversarial record file", cmd_gen_adv},
    {"train-defense", "stage 2: train a defense variant on benign data", cmd_train_defense},
    {"eval", "accuracy table for clean data and every attack and budget", cmd_eval},
    {"ablate", "clean and FGSM accuracy of every variant", cmd_ablate},
    {"sweep-memory", "reconstruction-error percentiles across memory sizes", cmd_sweep_memory},
    {"dump-latent", "export latent vectors with labels", cmd_dump_latent},
    {"benchmark", "per-stage latency of the defense", cmd_benchmark},
};

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const auto& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3) throw UsageError("unexpected argument '" + tok + "'");
    const auto eq = tok.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(tok.substr(2, eq - 2), tok.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw UsageError("option '" + tok + "' needs a value");
      out.emplace_back(tok.substr(2), extras[++i]);
    }
  }
  return out;
}

}  // namespace

double nearest_rank_percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty vector");
  if (!(p > 0 && p <= 100)) throw std::invalid_argument("percentile must be in (0, 100]");
  std::ranges::sort(values);
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::max<std::size_t>(rank, 1) - 1];
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"memdef: memory-gated autoencoder defense against adversarial examples", "memdef"};
  app.require_subcommand(1, 1);
  std::string keys = "Config keys (file lines `key = value`, or --key value after the subcommand):\n";
  for (const auto& key : config_keys()) {
    char line[160];
    std::snprintf(line, sizeof line, "  %-24s %s [%s]\n", key.name, key.help,
                  *key.default_value == '\0' ? "unset" : key.default_value);
    keys += line;
  }
  app.footer(keys);
  std::string config_path;
  std::vector<std::pair<CLI::App*, const CommandInfo*>> subs;
  for (const auto& info : kCommands) {
    auto* sub = app.add_subcommand(info.name, info.help);
    sub->add_option("--config", config_path, "run configuration file (key = value lines)")->required();
    sub->allow_extras();
    sub->footer("Any config key can be overridden with --key value; `memdef --help` lists the keys.");
    subs.emplace_back(sub, &info);
  }

  std::vector<std::string> argv_storage = args;
  argv_storage.insert(argv_storage.begin(), "memdef");
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "memdef: usage error: " << e.what() << "\n";
    for (const auto& [sub, info] : subs) {
      if (sub->parsed()) {
        err << sub->help();
        return kExitUsage;
      }
    }
    err << app.help();
    return kExitUsage;
  }

  for (const auto& [sub, info] : subs) {
    if (!sub->parsed()) continue;
    try {
      auto cfg = RunConfig::from_file(config_path);
      for (const auto& [key, value] : parse_overrides(sub->remaining())) cfg.set(key, value);
      Context ctx(info->name, std::move(cfg), out, err);
      return info->run(ctx);
    } catch (const UsageError& e) {
      err << "memdef " << info->name << ": usage error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      err << "memdef " << info->name << ": error: " << e.what() << "\n";
      return kExitRuntime;
    }
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace memdef::cli
