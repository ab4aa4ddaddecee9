// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>

#include "memdef/data/dataset.hpp"
#include "memdef/memory/attention.hpp"
#include "memdef/nets/networks.hpp"
#include "memdef/tensor/adam.hpp"
#include "memdef/tensor/ops.hpp"
#include "support/gradcheck.hpp"

namespace memdef::nets {
namespace {

using testing::gradcheck;
using testing::parameter_gradcheck;
using testing::probe_indices;
using testing::random_tensor;
using D = Tensor<double>;

// The F-MNIST layer stack on an 8x8 image; output padding adjusted so the
// decoder closes on 8x8 (1 -> 2 -> 4 -> 8).
AutoencoderSpec small_fmnist_spec() {
  auto s = autoencoder_spec(DatasetKind::kFashionMnist);
  s.image = {1, 8, 8};
  for (auto& l : s.decoder) l.geometry.output_padding = 1;
  check_autoencoder_spec(s);
  return s;
}

TEST(AutoencoderSpec, BottleneckFromShapeFormula) {
  auto f = autoencoder_spec(DatasetKind::kFashionMnist);
  // 28 -(k1,s2)-> 14 -(k3,s2,p1)-> 7 -(k3,s2,p1)-> 4
  EXPECT_EQ(f.latent_shape, (Shape{64, 4, 4}));
  EXPECT_EQ(f.latent_dim, 1024);
  auto c = autoencoder_spec(DatasetKind::kCifar10);
  // four k2 s1 convolutions: 32 -> 28
  EXPECT_EQ(c.latent_shape, (Shape{256, 28, 28}));
  EXPECT_EQ(c.latent_dim, 256 * 28 * 28);

  auto broken = f;
  broken.decoder.back().geometry.output_padding = 0;
  EXPECT_THROW(check_autoencoder_spec(broken), GeometryError);
}

TEST(Autoencoder, ShapesRangeAndDeterminism) {
  for (auto kind : {DatasetKind::kFashionMnist, DatasetKind::kCifar10}) {
    auto spec = autoencoder_spec(kind);
    Rng r1(5), r2(5);
    Encoder<float> e1(spec, r1), e2(spec, r2);
    Decoder<float> d1(spec, r1), d2(spec, r2);
    const auto img = spec.image;
    Tensor<float> x({2, img.channels, img.height, img.width}, 0.5f);
    auto z1 = e1.forward(x, false), z2 = e2.forward(x, false);
    ASSERT_EQ(z1.shape(), (Shape{2, spec.latent_dim}));
    for (auto v : z1.data()) {
      EXPECT_GT(v, 0.0f);
      EXPECT_LT(v, 1.0f);
    }
    EXPECT_TRUE(std::equal(z1.data().begin(), z1.data().end(), z2.data().begin()));
    auto y1 = d1.forward(Tensor<float>({1, spec.latent_dim}, 0.0f), false);
    auto y2 = d2.forward(Tensor<float>({1, spec.latent_dim}, 0.0f), false);
    EXPECT_EQ(y1.shape(), (Shape{1, img.channels, img.height, img.width}));
    EXPECT_TRUE(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
    EXPECT_THROW(e1.forward(Tensor<float>({1, img.channels, img.height + 1, img.width}), false), ShapeError);
  }
}

TEST(Autoencoder, OverfitsTenImages) {
  const std::string dir = MEMDEF_SOURCE_DIR "/data/fashion-mnist/";
  auto ds = data::load_idx(dir + "t10k-images-idx3-ubyte.gz", dir + "t10k-labels-idx1-ubyte.gz");
  std::vector<std::int64_t> first(10);
  std::iota(first.begin(), first.end(), 0);
  auto x = data::subset(ds, first).images;
  auto spec = autoencoder_spec(DatasetKind::kFashionMnist);
  Rng rng(1);
  Encoder<float> enc(spec, rng);
  Decoder<float> dec(spec, rng);
  TensorList<float> params;
  enc.collect("enc", params);
  dec.collect("dec", params);
  AdamConfig cfg;
  cfg.lr = 3e-3;
  Adam<float> opt(trainable_tensors(params), cfg);
  for (int step = 0; step < 2000; ++step) {
    GradTape<float> tape;
    opt.zero_grad();
    tape.backward(mse(dec.forward(enc.forward(x, true), true), x));
    opt.step();
  }
  const double err = mse(dec.forward(enc.forward(x, true), true), x).item();
  EXPECT_LT(err, 1e-3);
}

TEST(ClassifierB, FlattenWidthAndTieBreak) {
  Rng rng(2);
  ClassifierB<float> f(image_spec(DatasetKind::kFashionMnist), rng);
  EXPECT_EQ(f.flat_features(), 256);
  ClassifierB<float> c(image_spec(DatasetKind::kCifar10), rng);
  EXPECT_EQ(c.flat_features(), 400);

  auto pred = target_classify(f, Tensor<float>({3, 1, 28, 28}, 0.3f));
  for (int k : pred.classes) {
    EXPECT_GE(k, 0);
    EXPECT_LT(k, 10);
  }
  auto tie = predict_from_logits(Tensor<double>({1, 4}, {0.5, 2.0, 2.0, 1.0}));
  EXPECT_EQ(tie.classes[0], 1);
  double s = 0;
  for (auto p : tie.probs.data()) s += p;
  EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(ResidualSelector, ValidPredictionsAndDeterministicBuild) {
  SelectorSpec spec;
  spec.widths = {8, 16};
  spec.blocks = {1, 1};
  Rng r1(3), r2(3);
  ResidualSelector<float> a(image_spec(DatasetKind::kFashionMnist), spec, r1);
  ResidualSelector<float> b(image_spec(DatasetKind::kFashionMnist), spec, r2);
  TensorList<float> pa, pb;
  a.collect("sel", pa);
  b.collect("sel", pb);
  ASSERT_EQ(pa.size(), pb.size());
  EXPECT_EQ(parameter_count(pa), parameter_count(pb));
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(std::equal(pa[i].tensor.data().begin(), pa[i].tensor.data().end(), pb[i].tensor.data().begin()));
  }
  auto pred = selector_predict(a, Tensor<float>({4, 1, 28, 28}, 0.7f));
  ASSERT_EQ(pred.classes.size(), 4u);
  for (int k : pred.classes) {
    EXPECT_GE(k, 0);
    EXPECT_LT(k, 10);
  }
}

TEST(ParameterCount, FashionMnistAutoencoderAndClassifier) {
  auto spec = autoencoder_spec(DatasetKind::kFashionMnist);
  Rng rng(4);
  Encoder<float> enc(spec, rng);
  Decoder<float> dec(spec, rng);
  ClassifierB<float> cls(spec.image, rng);
  TensorList<float> e, d, c;
  enc.collect("e", e);
  dec.collect("d", d);
  cls.collect("c", c);
  // conv weights + BN affine (bias only on layers without BN)
  EXPECT_EQ(parameter_count(e), (16 * 1 + 32) + (32 * 16 * 9 + 64) + (64 * 32 * 9 + 64));
  EXPECT_EQ(parameter_count(d), (64 * 32 * 9 + 64) + (32 * 16 * 9 + 32) + (16 * 1 * 9 + 1));
  EXPECT_EQ(parameter_count(c), (6 * 25 + 6) + (16 * 6 * 25 + 16) + (256 * 256 + 256) + (256 * 128 + 128) +
                                    (128 * 10 + 10));
}

// --- finite-difference checks of whole networks, 64-bit ---------------------
// With ReLU and max-pool inside, a step of 1e-3 regularly straddles a kink in
// some unit, so whole-network checks use a smaller step.
constexpr double kNetStep = 1e-6;

TEST(NetworkGradCheck, EncoderDecoderOnEightByEight) {
  auto spec = small_fmnist_spec();
  Rng rng(6);
  Encoder<double> enc(spec, rng);
  Decoder<double> dec(spec, rng);
  auto x = random_tensor({2, 1, 8, 8}, rng, 0, 1);
  auto target = random_tensor({2, 1, 8, 8}, rng, 0, 1);
  auto loss = [&](const std::vector<D>& in) { return mse(dec.forward(enc.forward(in[0], true), true), target); };
  EXPECT_LT(gradcheck(loss, {x}), 1e-5);  // leaky ReLU and sigmoid only: default step

  TensorList<double> params;
  enc.collect("enc", params);
  dec.collect("dec", params);
  for (const auto& p : params) {
    if (!p.trainable) continue;
    auto r = parameter_gradcheck([&] { return loss({x}); }, p.tensor, probe_indices(p.tensor.numel(), 12), kNetStep);
    EXPECT_LT(r.relative_error, 1e-5) << p.name;
  }
}

TEST(NetworkGradCheck, ClassifierBOnSmallestAdmissibleImage) {
  // Two 5x5 conv + 2x2 pool stages need at least 16x16 input.
  Rng rng(7);
  ClassifierB<double> cls(ImageSpec{1, 16, 16}, rng);
  auto x = random_tensor({2, 1, 16, 16}, rng, 0, 1);
  std::vector<int> labels{3, 8};
  auto loss = [&](const std::vector<D>& in) { return cross_entropy(cls.forward(in[0]), labels); };
  EXPECT_LT(gradcheck(loss, {x}, kNetStep), 1e-5);
  TensorList<double> params;
  cls.collect("cls", params);
  for (const auto& p : params) {
    auto r = parameter_gradcheck([&] { return loss({x}); }, p.tensor, probe_indices(p.tensor.numel(), 12), kNetStep);
    EXPECT_LT(r.relative_error, 1e-5) << p.name;
  }
}

TEST(NetworkGradCheck, FullMaskedAttentionPipeline) {
  auto spec = small_fmnist_spec();
  Rng rng(8);
  Encoder<double> enc(spec, rng);
  Decoder<double> dec(spec, rng);
  MemoryBank<double> bank(20, spec.latent_dim, 10, rng);
  auto x = random_tensor({2, 1, 8, 8}, rng, 0, 1);
  std::vector<int> classes{4, 9};
  auto [mask, unmask] = class_masks(std::span<const int>(classes), bank);
  ShrinkConfig shrink;
  auto loss = [&](const std::vector<D>& in) {
    auto z = enc.forward(in[0], true);
    auto w_bar = address(cosine_logits(z, bank));
    auto sparse = l1_normalize_rows(hard_shrink_values(w_bar, shrink.phi, shrink.epsilon_num), shrink.epsilon_num);
    auto parts = split_weights(sparse, mask, unmask);
    auto x_hat = dec.forward(latent_recombine(parts.w, bank), true);
    return add(mse(x_hat, in[0]), scale(attention_entropy(parts.w), 2e-4));
  };
  EXPECT_LT(gradcheck(loss, {x}), 1e-5);
  auto r = parameter_gradcheck([&] { return loss({x}); }, bank.items(), probe_indices(bank.items().numel(), 40));
  EXPECT_LT(r.relative_error, 1e-5);
}

TEST(NetworkGradCheck, ResidualSelector) {
  SelectorSpec spec;
  spec.widths = {4, 6};
  spec.blocks = {1, 1};
  Rng rng(9);
  ResidualSelector<double> sel(ImageSpec{1, 8, 8}, spec, rng);
  auto x = random_tensor({3, 1, 8, 8}, rng, 0, 1);
  std::vector<int> labels{0, 5, 9};
  auto loss = [&](const std::vector<D>& in) { return cross_entropy(sel.forward(in[0], true), labels); };
  EXPECT_LT(gradcheck(loss, {x}, kNetStep), 1e-5);
  TensorList<double> params;
  sel.collect("sel", params);
  for (const auto& p : params) {
    if (!p.trainable) continue;
    auto r = parameter_gradcheck([&] { return loss({x}); }, p.tensor, probe_indices(p.tensor.numel(), 6), kNetStep);
    EXPECT_LT(r.relative_error, 1e-5) << p.name;
  }
}

}  // namespace
}  // namespace memdef::nets
