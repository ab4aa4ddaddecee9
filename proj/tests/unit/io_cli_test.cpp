// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <sstream>

#include "memdef/cli/commands.hpp"
#include "memdef/cli/config.hpp"
#include "memdef/data/dataset.hpp"
#include "memdef/io/binary.hpp"
#include "memdef/io/checkpoint.hpp"
#include "memdef/training/model.hpp"

namespace memdef {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("memdef_cli_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

TensorList<float> sample_tensors() {
  TensorList<float> list;
  list.push_back({"a.weight", Tensor<float>({2, 3}, {1.5f, -0.0f, 3e-38f, 1e30f, -7.25f, 0.1f})});
  list.push_back({"a.running_mean", Tensor<float>({4}, {0.f, 1.f, 2.f, 3.f}), false});
  list.push_back({"b", Tensor<float>({1, 1, 2, 2}, {9.f, 8.f, 7.f, 6.f})});
  return list;
}

// --- checkpoint -------------------------------------------------------------

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  auto list = sample_tensors();
  json meta{{"kind", "test"}, {"n", 3}};
  io::write_checkpoint(dir.file("x.mdef"), meta, list);
  auto ck = io::read_checkpoint(dir.file("x.mdef"));
  EXPECT_EQ(ck.metadata, meta);
  ASSERT_EQ(ck.tensors.size(), 3u);
  for (std::size_t i = 0; i < list.size(); ++i) {
    EXPECT_EQ(ck.tensors[i].name, list[i].name);
    EXPECT_EQ(ck.tensors[i].tensor.shape(), list[i].tensor.shape());
    EXPECT_TRUE(std::ranges::equal(ck.tensors[i].tensor.data(), list[i].tensor.data()));
  }
  // Encoding again gives the same bytes.
  EXPECT_EQ(io::read_file(dir.file("x.mdef")), io::encode_checkpoint(meta, list));
}

TEST(Checkpoint, LoadTensorsCopiesIntoHandles) {
  auto list = sample_tensors();
  auto ck = io::decode_checkpoint(io::encode_checkpoint(json::object(), list), "mem");
  auto target = sample_tensors();
  for (auto& t : target) std::ranges::fill(t.tensor.mutable_data(), 0.0f);
  io::load_tensors(ck, target);
  for (std::size_t i = 0; i < list.size(); ++i)
    EXPECT_TRUE(std::ranges::equal(target[i].tensor.data(), list[i].tensor.data()));

  auto missing = target;
  missing.push_back({"c", Tensor<float>({1}, 0.f)});
  EXPECT_THROW(io::load_tensors(ck, missing), io::FormatError);
  auto extra = target;
  extra.pop_back();
  EXPECT_THROW(io::load_tensors(ck, extra), io::FormatError);
  auto reshaped = sample_tensors();
  reshaped[2].tensor = Tensor<float>({4}, 0.f);
  EXPECT_THROW(io::load_tensors(ck, reshaped), io::FormatError);
}

TEST(Checkpoint, DefenseModelRoundTrip) {
  training::DefenseModel a(training::DefenseSpec{}, 1), b(training::DefenseSpec{}, 2);
  auto ck = io::decode_checkpoint(io::encode_checkpoint(json::object(), a.tensors()), "mem");
  io::load_tensors(ck, b.tensors());
  auto la = a.tensors(), lb = b.tensors();
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i)
    EXPECT_TRUE(std::ranges::equal(la[i].tensor.data(), lb[i].tensor.data())) << la[i].name;
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto bytes = io::encode_checkpoint(json{{"k", 1}}, sample_tensors());

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(io::decode_checkpoint(bad_magic, "m"), io::FormatError);

  auto future = bytes;
  future[4] = 99;
  try {
    io::decode_checkpoint(future, "m");
    FAIL() << "version 99 accepted";
  } catch (const io::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported checkpoint version 99"), std::string::npos);
  }

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(io::decode_checkpoint(truncated, "m"), io::FormatError);

  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(io::decode_checkpoint(trailing, "m"), io::FormatError);

  auto dup = sample_tensors();
  dup.push_back(dup[0]);
  EXPECT_THROW(io::encode_checkpoint(json::object(), dup), io::FormatError);
  EXPECT_THROW(io::read_checkpoint("/nonexistent/x.mdef"), std::runtime_error);
}

// --- config -----------------------------------------------------------------

TEST(Config, DefaultsCoverEveryKey) {
  cli::RunConfig cfg;
  for (const auto& key : cli::config_keys()) EXPECT_EQ(cfg.str(key.name), key.default_value) << key.name;
  EXPECT_EQ(cfg.echo().size(), cli::config_keys().size());
}

TEST(Config, ParsesFileText) {
  auto cfg = cli::RunConfig::from_text(
      "# comment\n"
      "seed = 7   # trailing\n"
      "\n"
      "  epsilons = 9/255, 25/255\n"
      "shrink = off\n"
      "selector_widths = 8,16\n",
      "t.cfg");
  EXPECT_EQ(cfg.integer("seed"), 7);
  auto eps = cfg.numbers("epsilons");
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_DOUBLE_EQ(eps[0], 9.0 / 255);
  EXPECT_DOUBLE_EQ(eps[1], 25.0 / 255);
  EXPECT_FALSE(cfg.flag("shrink"));
  EXPECT_EQ(cfg.integers("selector_widths"), (std::vector<std::int64_t>{8, 16}));
  EXPECT_EQ(cfg.str("dataset"), "fmnist");
}

TEST(Config, OverridesAndQueries) {
  cli::RunConfig cfg;
  cfg.set("lr", "3e-3");
  EXPECT_DOUBLE_EQ(cfg.number("lr"), 3e-3);
  EXPECT_FALSE(cfg.has("model_ckpt"));
  cfg.set("model_ckpt", "m.mdef");
  EXPECT_TRUE(cfg.has("model_ckpt"));
  EXPECT_THROW(cfg.set("no_such_key", "1"), cli::UsageError);
  cfg.set("seed", "abc");
  EXPECT_THROW(cfg.integer("seed"), cli::UsageError);
  cfg.set("shrink", "maybe");
  EXPECT_THROW(cfg.flag("shrink"), cli::UsageError);
  EXPECT_THROW(cli::parse_number("1/0", "x"), cli::UsageError);
  EXPECT_DOUBLE_EQ(cli::parse_number("25/255", "x"), 25.0 / 255);
}

TEST(Config, ErrorsNameTheLine) {
  try {
    cli::RunConfig::from_text("seed = 1\nbogus = 2\n", "run.cfg");
    FAIL();
  } catch (const cli::UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(cli::RunConfig::from_text("seed = 1\nseed = 2\n", "r"), cli::UsageError);
  EXPECT_THROW(cli::RunConfig::from_text("seed 1\n", "r"), cli::UsageError);
  EXPECT_THROW(cli::RunConfig::from_file("/nonexistent.cfg"), cli::UsageError);
}

// --- cli --------------------------------------------------------------------

TEST(Cli, NearestRankPercentile) {
  std::vector<double> v{5, 1, 4, 2, 3};
  EXPECT_EQ(cli::nearest_rank_percentile(v, 100), 5);
  EXPECT_EQ(cli::nearest_rank_percentile(v, 50), 3);
  EXPECT_EQ(cli::nearest_rank_percentile(v, 1), 1);
  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[static_cast<std::size_t>(i)] = i + 1;
  EXPECT_EQ(cli::nearest_rank_percentile(hundred, 99), 99);
  EXPECT_THROW(cli::nearest_rank_percentile({}, 99), std::invalid_argument);
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliFlow : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(5);
    for (const auto& [split, n] : {std::pair{"train", 60}, std::pair{"t10k", 20}}) {
      data::Dataset ds;
      std::vector<float> px(static_cast<std::size_t>(n * 784));
      for (auto& v : px) v = static_cast<float>(rng.below(256)) / 255.0f;
      ds.images = Tensor<float>({n, 1, 28, 28}, px);
      for (int i = 0; i < n; ++i) ds.labels.push_back(i % 10);
      data::write_idx(dir.file(std::string(split) + "-images-idx3-ubyte"),
                      dir.file(std::string(split) + "-labels-idx1-ubyte"), ds);
    }
    io::write_text_file(config, "data_dir = " + dir.file("") + "\noutput_dir = " + dir.file("out") +
                                    "\ntrain_per_class = 6\ntest_per_class = 2\nselector_widths = 4\n"
                                    "selector_blocks = 1\nselector_benign_epochs = 1\nselector_mixture_epochs = 1\n"
                                    "adv_iterations = 2\nadv_epsilon = 0.3\ndefense_epochs = 1\nmemory_slots = 20\n"
                                    "attacks = fgsm\n");
  }
  TempDir dir;
  std::string config = dir.file("run.cfg");
};

TEST_F(CliFlow, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"frobnicate", "--config", config}).code, cli::kExitUsage);
  EXPECT_EQ(run({"eval"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--config", dir.file("missing.cfg")}).code, cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--config", config, "--bogus", "1"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"eval", "--config", config, "--seed"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"train-defense", "--config", config, "--variant", "huge"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"ablate", "--config", config}).code, cli::kExitUsage);
  EXPECT_EQ(run({"benchmark", "--config", config, "--benchmark_batches", "0"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"sweep-memory", "--config", config, "--sweep_sizes", "15"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST_F(CliFlow, RuntimeErrorsExitOne) {
  auto r = run({"prep-data", "--config", config, "--data_dir", dir.file("nowhere")});
  EXPECT_EQ(r.code, cli::kExitRuntime) << r.err;
  EXPECT_FALSE(r.err.empty());
}

TEST_F(CliFlow, StagesChainThroughFiles) {
  auto r = run({"prep-data", "--config", config});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"train-selector", "--config", config});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir.file("out/selector.mdef")));
  EXPECT_TRUE(fs::exists(dir.file("out/selector_benign.mdef")));
  r = run({"gen-adv", "--config", config});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"train-defense", "--config", config, "--variant=full"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = run({"eval", "--config", config});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = io::read_file(dir.file("out/eval_full.csv"));
  const std::string text(csv.begin(), csv.end());
  EXPECT_EQ(text.rfind("# config: {", 0), 0u);
  EXPECT_NE(text.find("\nclean,0,"), std::string::npos);
  EXPECT_NE(text.find("\nfgsm,"), std::string::npos);

  // A selector checkpoint is not a defense checkpoint.
  r = run({"eval", "--config", config, "--model_ckpt", dir.file("out/selector.mdef")});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  // Dataset mismatch between config and checkpoint.
  r = run({"dump-latent", "--config", config, "--dataset", "cifar10"});
  EXPECT_NE(r.code, cli::kExitOk);
}

}  // namespace
}  // namespace memdef
