// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace memdef::cli {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_plain(const std::string& text, const std::string& what) {
  double value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || text.empty())
    throw UsageError(what + ": '" + text + "' is not a number");
  return value;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"dataset", "fmnist", "fmnist or cifar10"},
      {"data_dir", "data/fashion-mnist", "directory with the IDX files or CIFAR-10 batches"},
      {"train_per_class", "200", "training images per class (0: all)"},
      {"test_per_class", "50", "held-out images per class (0: all)"},
      {"output_dir", "runs", "directory for artifacts"},
      {"seed", "1", "base seed"},
      {"batch_size", "64", "mini-batch size"},
      {"selector_widths", "16,32,64", "selector stage widths"},
      {"selector_blocks", "1,1,1", "selector basic blocks per stage"},
      {"selector_benign_epochs", "5", "selector epochs on benign data"},
      {"selector_mixture_epochs", "5", "selector epochs on the benign/adversarial mixture"},
      {"selector_lr", "1e-3", "selector Adam learning rate"},
      {"selector_augment", "crop,hflip", "selector augmentations: crop, hflip, vflip, erase, none"},
      {"adv_attack", "pgd", "attack used to build selector training data"},
      {"adv_epsilon", "0.03", "L-inf budget of that attack"},
      {"adv_step_size", "0.0075", "its step size"},
      {"adv_iterations", "10", "its iteration count"},
      {"adv_split", "train", "split attacked by gen-adv"},
      {"variant", "full", "defense variant: bare, nomem or full"},
      {"memory_slots", "auto", "memory size S (auto: 100 F-MNIST, 200 CIFAR-10)"},
      {"phi", "0.0025", "hard-shrinkage threshold"},
      {"shrink", "true", "apply hard shrinkage"},
      {"alpha", "2e-4", "entropy weight"},
      {"beta", "1e-4", "non-target penalty factor"},
      {"gamma", "1", "classifier-B cross-entropy weight"},
      {"defense_epochs", "10", "stage-2 epochs"},
      {"lr", "1e-3", "stage-2 Adam learning rate"},
      {"noise_std", "0.01", "gaussian input noise during stage 2"},
      {"l2", "auto", "L2 coefficient (auto: 0 F-MNIST, 1e-5 CIFAR-10)"},
      {"attacks", "fgsm,bim,pgd,cw", "attacks evaluated by eval"},
      {"epsilons", "auto", "L-inf budgets for eval (auto: 9/255,25/255 or 2/255,8/255,16/255)"},
      {"bim_iterations", "10", "BIM iterations"},
      {"bim_step_size", "auto", "BIM step (auto: epsilon / iterations)"},
      {"pgd_iterations", "40", "PGD iterations"},
      {"pgd_step_size", "auto", "PGD step (auto: epsilon / 4)"},
      {"cw_iterations", "100", "CW iterations per binary-search step"},
      {"cw_binary_steps", "5", "CW binary-search steps"},
      {"cw_lr", "5e-3", "CW Adam learning rate"},
      {"cw_kappa", "0", "CW confidence"},
      {"cw_initial_c", "1e-2", "CW initial trade-off constant"},
      {"eval_batch", "100", "evaluation batch size"},
      {"ablation_epsilon", "25/255", "FGSM budget of the ablation"},
      {"sweep_sizes", "50,100,200", "memory sizes for sweep-memory"},
      {"sweep_epochs", "5", "stage-2 epochs per sweep size"},
      {"sweep_epsilon", "25/255", "FGSM budget for the sweep error gap"},
      {"benchmark_batches", "20", "timed batches of 10 images"},
      {"split", "test", "split for dump-latent"},
      {"selector_ckpt", "", "selector checkpoint (default: <output_dir>/selector.mdef)"},
      {"model_ckpt", "", "defense checkpoint (default: <output_dir>/defense_full.mdef)"},
      {"bare_ckpt", "", "bare classifier checkpoint for eval and ablate"},
      {"nomem_ckpt", "", "autoencoder-without-memory checkpoint for ablate"},
      {"full_ckpt", "", "full defense checkpoint for ablate"},
      {"adv_file", "", "adversarial record file (gen-adv output, train-selector input)"},
      {"phase", "all", "train-selector phase: all, benign or mixture"},
      {"out", "", "output file of the command (default under output_dir)"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.name] = k.default_value;
}

RunConfig RunConfig::from_text(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::stringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(number);
    if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw UsageError(where + ": key '" + key + "' set twice");
    try {
      cfg.set(key, trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(where + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw UsageError("unknown config key '" + key + "'");
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const {
  auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

double parse_number(const std::string& text, const std::string& what) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_plain(text, what);
  const double num = parse_plain(trim(text.substr(0, slash)), what);
  const double den = parse_plain(trim(text.substr(slash + 1)), what);
  if (den == 0) throw UsageError(what + ": division by zero in '" + text + "'");
  return num / den;
}

double RunConfig::number(const std::string& key) const { return parse_number(str(key), key); }

std::int64_t RunConfig::integer(const std::string& key) const {
  const auto& text = str(key);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw UsageError(key + ": '" + text + "' is not an integer");
  return value;
}

bool RunConfig::flag(const std::string& key) const {
  std::string v = str(key);
  std::ranges::transform(v, v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError(key + ": '" + str(key) + "' is not a boolean");
}

std::vector<std::string> RunConfig::strings(const std::string& key) const { return split_list(str(key)); }

std::vector<double> RunConfig::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : strings(key)) out.push_back(parse_number(item, key));
  return out;
}

std::vector<std::int64_t> RunConfig::integers(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (const auto& item : strings(key)) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size())
      throw UsageError(key + ": '" + item + "' is not an integer");
    out.push_back(value);
  }
  return out;
}

nlohmann::json RunConfig::echo() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [k, v] : values_) out[k] = v;
  return out;
}

}  // namespace memdef::cli
