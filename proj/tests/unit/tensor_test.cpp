// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "memdef/tensor/adam.hpp"
#include "memdef/tensor/conv.hpp"
#include "memdef/tensor/init.hpp"
#include "memdef/tensor/ops.hpp"
#include "support/gradcheck.hpp"

namespace memdef {
namespace {

using testing::gradcheck;
using testing::random_away_from_zero;
using testing::random_tensor;
using D = Tensor<double>;

// Projects an arbitrary output onto a fixed random direction so every
// Jacobian row contributes to the checked scalar.
D project(const D& out, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng)));
}

TEST(Conv2d, UnitPointwiseKernelIsIdentity) {
  Rng rng(1);
  auto x = random_tensor({2, 1, 5, 4}, rng);
  D kernel({1, 1, 1, 1}, 1.0);
  auto y = conv2d(x, kernel);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.at(i), x.at(i));
}

TEST(Conv2d, OnesKernelOnConstantImageSumsNineValues) {
  const double c = 0.37;
  D x({1, 1, 6, 6}, c);
  D kernel({1, 1, 3, 3}, 1.0);
  auto y = conv2d(x, kernel);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  for (auto v : y.data()) EXPECT_NEAR(v, 9 * c, 1e-12);
}

TEST(Conv2d, OutputShapeFormula) {
  D x({1, 1, 28, 28}, 0.5);
  D kernel({4, 1, 3, 3}, 0.1);
  auto y = conv2d(x, kernel, 2, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 4, 14, 14}));
  EXPECT_EQ(conv_output_size(28, 3, 2, 1), 14);
}

TEST(Conv2d, RejectsBadShapesAndGeometry) {
  D x({1, 2, 4, 4}, 0.0);
  EXPECT_THROW(conv2d(x, D({1, 3, 3, 3}, 0.0)), ShapeError);
  EXPECT_THROW(conv2d(x, D({1, 2, 5, 5}, 0.0)), GeometryError);
  EXPECT_THROW(conv2d(x, D({1, 2, 3, 3}, 0.0), 0, 0), GeometryError);
}

TEST(ConvTranspose2d, UnitKernelIsIdentity) {
  Rng rng(2);
  auto x = random_tensor({1, 1, 3, 3}, rng);
  auto y = conv_transpose2d(x, D({1, 1, 1, 1}, 1.0));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.at(i), x.at(i));
}

TEST(ConvTranspose2d, UpsamplesFourteenToTwentyEight) {
  D x({1, 2, 14, 14}, 0.2);
  auto y = conv_transpose2d(x, D({2, 1, 3, 3}, 0.1), 2, 1, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 28, 28}));
  EXPECT_THROW(conv_transpose2d(x, D({2, 1, 3, 3}, 0.1), 2, 1, 2), GeometryError);
}

TEST(ConvTranspose2d, IsAdjointOfConv2d) {
  // <conv2d(x,k), y> == <x, conv_transpose2d(y,k)> for several geometries.
  Rng rng(3);
  struct Case { std::int64_t size, kernel, stride, padding; };
  for (auto c : {Case{7, 3, 1, 0}, Case{8, 3, 2, 1}, Case{7, 2, 1, 1}, Case{6, 1, 2, 0}}) {
    auto x = random_tensor({2, 3, c.size, c.size}, rng);
    auto k = random_tensor({4, 3, c.kernel, c.kernel}, rng);
    auto cx = conv2d(x, k, c.stride, c.padding);
    auto y = random_tensor(cx.shape(), rng);
    // Recover the output_padding that makes the transposed shape match x.
    const auto base = (cx.dim(2) - 1) * c.stride - 2 * c.padding + c.kernel;
    auto ty = conv_transpose2d(y, k, c.stride, c.padding, c.size - base);
    ASSERT_EQ(ty.shape(), x.shape());
    const double lhs = dot_product(cx, y), rhs = dot_product(x, ty);
    EXPECT_NEAR(lhs, rhs, 1e-5 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(Activations, PinnedValues) {
  EXPECT_DOUBLE_EQ(leaky_relu(D({1}, -4.0)).item(), -1.0);
  EXPECT_DOUBLE_EQ(leaky_relu(D({1}, 3.0)).item(), 3.0);
  EXPECT_DOUBLE_EQ(sigmoid_act(D({1}, 0.0)).item(), 0.5);
  EXPECT_DOUBLE_EQ(relu(D({2}, {-2.0, 2.0})).at(0), 0.0);
  auto pooled = max_pool2d(D({1, 1, 2, 2}, {1, 3, 2, 0}), 2, 2);
  EXPECT_DOUBLE_EQ(pooled.item(), 3.0);
}

TEST(Activations, SigmoidStaysInUnitInterval) {
  auto y = sigmoid_act(D({3}, {-30.0, 0.0, 30.0}));
  for (auto v : y.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Softmax, ClosedForms) {
  auto uniform = softmax(D({1, 4}, 2.5));
  for (auto v : uniform.data()) EXPECT_NEAR(v, 0.25, 1e-15);
  auto p = softmax(D({1, 2}, {0.0, std::log(2.0)}));
  EXPECT_NEAR(p.at(0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(p.at(1), 2.0 / 3.0, 1e-15);
}

TEST(Softmax, RowsSumToOneAndAreShiftInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    auto logits = random_tensor({3, 7}, rng, -20, 20);
    auto p = softmax(logits);
    auto q = softmax(add_scalar(logits, 123.0));
    for (int r = 0; r < 3; ++r) {
      double s = 0;
      for (int c = 0; c < 7; ++c) {
        s += p.at(r * 7 + c);
        EXPECT_GT(p.at(r * 7 + c), 0.0);
        EXPECT_NEAR(p.at(r * 7 + c), q.at(r * 7 + c), 1e-12);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
  // float path too
  auto pf = softmax(Tensor<float>({1, 5}, {100.f, 101.f, 99.f, -50.f, 0.f}));
  float s = 0;
  for (auto v : pf.data()) s += v;
  EXPECT_NEAR(s, 1.0f, 1e-6f);
}

TEST(Losses, PinnedValues) {
  Rng rng(5);
  auto x = random_tensor({2, 3}, rng);
  EXPECT_DOUBLE_EQ(mse(x, x).item(), 0.0);
  EXPECT_DOUBLE_EQ(mse(D({2}, 0.0), D({2}, 1.0)).item(), 1.0);
  EXPECT_DOUBLE_EQ(mse(D({2}, 0.0), D({2}, 1.0), Reduction::kSum).item(), 2.0);
  std::vector<int> labels{3, 0};
  EXPECT_NEAR(cross_entropy(D({2, 10}, 0.7), labels).item(), std::log(10.0), 1e-12);
  EXPECT_NEAR(cross_entropy(D({2, 10}, 0.7), labels, Reduction::kSum).item(), 2 * std::log(10.0),
              1e-12);
  std::vector<int> bad{10, 0};
  EXPECT_THROW(cross_entropy(D({2, 10}, 0.0), bad), std::out_of_range);
  EXPECT_THROW(mse(D({2}, 0.0), D({3}, 0.0)), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  D x({2, 3}, 0.5);
  x.set_requires_grad(true);
  GradTape<double> tape;
  tape.backward(sum(x));
  auto grad = x.grad();
  for (auto g : grad.data()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, DisconnectedParameterHasZeroGrad) {
  auto used = D::parameter({2}, {1.0, 2.0});
  auto unused = D::parameter({3}, {1.0, 2.0, 3.0});
  GradTape<double> tape;
  tape.backward(sum(square(used)));
  EXPECT_FALSE(unused.has_grad());
  auto zeros = unused.grad();
  for (auto g : zeros.data()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(used.grad().at(1), 4.0);
}

TEST(Backward, TapeContractErrors) {
  D x({3}, 1.0);
  x.set_requires_grad(true);
  GradTape<double> tape;
  auto y = scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), TapeError);  // non-scalar root
  auto loss = sum(y);
  tape.backward(loss);
  EXPECT_THROW(tape.backward(loss), TapeError);  // replay without re-recording
  EXPECT_THROW(sum(x), TapeError);               // recording onto a consumed tape
  tape.reset();
  x.zero_grad();
  tape.backward(sum(scale(x, 3.0)));
  EXPECT_EQ(x.grad().at(0), 3.0);
}

TEST(Backward, NoTapeMeansNoRecording) {
  auto p = D::parameter({2}, {1.0, 2.0});
  auto y = sum(p);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, FrozenParametersReceiveNothing) {
  auto w = D::parameter({1, 2}, {1.0, -2.0});
  D x({1, 2}, {0.5, 0.5});
  x.set_requires_grad(true);
  GradTape<double> tape;
  FrozenParameters frozen;
  tape.backward(sum(linear(x, w, D())));
  EXPECT_FALSE(w.has_grad());
  EXPECT_EQ(x.grad().at(1), -2.0);
}

// --- finite-difference suite: every primitive, 64-bit, side <= 8 ----------

TEST(GradCheck, ElementwiseAndReductions) {
  Rng rng(10);
  auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(add(in[0], in[1])); }, {a, b}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(sub(in[0], in[1])); }, {a, b}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(mul(in[0], in[1])); }, {a, b}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(square(scale(in[0], 1.7))); }, {a}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return mean(square(in[0])); }, {a}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(sum_per_sample(square(in[0]))); }, {a}), 1e-5);
  std::vector<double> w{0.5, -2.0, 1.5};
  EXPECT_LT(gradcheck([&](const std::vector<D>& in) {
              return project(scale_per_sample(in[0], std::span<const double>(w)));
            }, {a}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(reshape(in[0], {2, 6})); }, {a}), 1e-5);
}

TEST(GradCheck, MatmulAndLinear) {
  Rng rng(11);
  auto a = random_tensor({3, 5}, rng), b = random_tensor({5, 4}, rng);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(matmul(in[0], in[1])); }, {a, b}), 1e-5);
  auto x = random_tensor({4, 6}, rng), w = random_tensor({3, 6}, rng), bias = random_tensor({3}, rng);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(linear(in[0], in[1], in[2])); },
                      {x, w, bias}), 1e-5);
}

TEST(GradCheck, Activations) {
  Rng rng(12);
  auto x = random_away_from_zero({2, 8}, rng);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(leaky_relu(in[0])); }, {x}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(relu(in[0])); }, {x}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(sigmoid_act(in[0])); }, {x}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(tanh_act(in[0])); }, {x}), 1e-5);
}

TEST(GradCheck, SoftmaxFamilyAndLosses) {
  Rng rng(13);
  auto logits = random_tensor({3, 6}, rng, -2, 2);
  auto target = random_tensor({3, 6}, rng);
  std::vector<int> labels{1, 5, 0};
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(softmax(in[0])); }, {logits}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(log_softmax(in[0])); }, {logits}), 1e-5);
  EXPECT_LT(gradcheck([&](const std::vector<D>& in) { return cross_entropy(in[0], labels); }, {logits}), 1e-5);
  EXPECT_LT(gradcheck([&](const std::vector<D>& in) { return cross_entropy(in[0], labels, Reduction::kSum); },
                      {logits}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return mse(in[0], in[1]); }, {logits, target}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return mse(in[0], in[1], Reduction::kSum); },
                      {logits, target}), 1e-5);
}

TEST(GradCheck, ConvolutionFamily) {
  Rng rng(14);
  auto x = random_tensor({2, 3, 7, 7}, rng);
  auto k = random_tensor({4, 3, 3, 3}, rng);
  auto bias = random_tensor({4}, rng);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) {
              return project(conv2d(in[0], in[1], in[2], {2, 1, 0}));
            }, {x, k, bias}), 1e-5);
  auto k1 = random_tensor({4, 3, 1, 1}, rng);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(conv2d(in[0], in[1], 1, 0)); }, {x, k1}), 1e-5);
  auto y = random_tensor({2, 4, 4, 4}, rng);
  auto kt = random_tensor({4, 2, 3, 3}, rng);
  auto bt = random_tensor({2}, rng);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) {
              return project(conv_transpose2d(in[0], in[1], in[2], {2, 1, 1}));
            }, {y, kt, bt}), 1e-5);
}

TEST(GradCheck, PoolingAndBatchNorm) {
  Rng rng(15);
  // Distinct values keep the pooling argmax stable under +-h.
  std::vector<double> vals(2 * 2 * 6 * 6);
  std::iota(vals.begin(), vals.end(), 0.0);
  Rng shuffle_rng(16);
  shuffle_rng.shuffle(std::span<double>(vals));
  for (auto& v : vals) v *= 0.01;
  D x({2, 2, 6, 6}, vals);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(max_pool2d(in[0], 2, 2)); }, {x}), 1e-5);
  EXPECT_LT(gradcheck([](const std::vector<D>& in) { return project(global_avg_pool2d(in[0])); }, {x}), 1e-5);

  auto xb = random_tensor({3, 2, 4, 4}, rng);
  auto gamma = random_tensor({2}, rng, 0.5, 1.5), beta = random_tensor({2}, rng);
  for (bool training : {true, false}) {
    D rm({2}, 0.1), rv({2}, 0.9);
    EXPECT_LT(gradcheck([&](const std::vector<D>& in) {
                return project(batch_norm2d(in[0], in[1], in[2], rm, rv, training));
              }, {xb, gamma, beta}), 1e-5)
        << "training=" << training;
  }
}

TEST(GradCheck, SinglePrecisionWithinLooserBound) {
  Rng rng(17);
  std::vector<float> xv(2 * 2 * 5 * 5), kv(3 * 2 * 3 * 3);
  for (auto& v : xv) v = static_cast<float>(rng.uniform(-1, 1));
  for (auto& v : kv) v = static_cast<float>(rng.uniform(-1, 1));
  Tensor<float> x({2, 2, 5, 5}, xv);
  Tensor<float> k({3, 2, 3, 3}, kv);
  auto loss_fn = [](const Tensor<float>& a, const Tensor<float>& b) {
    return sum(square(sigmoid_act(conv2d(a, b, 1, 1))));
  };
  x.set_requires_grad(true);
  GradTape<float> tape;
  tape.backward(loss_fn(x, k));
  auto analytic = x.grad();
  std::vector<double> a(analytic.data().begin(), analytic.data().end()), n(xv.size());
  const float h = 1e-2f;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    auto up = xv, down = xv;
    up[i] += h;
    down[i] -= h;
    n[i] = (static_cast<double>(loss_fn(Tensor<float>(x.shape(), up), k).item()) -
            loss_fn(Tensor<float>(x.shape(), down), k).item()) / (2.0 * h);
  }
  EXPECT_LT(testing::compare(a, n).relative_error, 1e-3);
}

// --- optimizer and initialisation -----------------------------------------

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<D> params{D::parameter({3}, {0.1, -0.2, 0.3})};
  AdamState<double> state;
  adam_step(params, {std::vector<double>(3, 0.0)}, state);
  EXPECT_EQ(params[0].at(0), 0.1);
  EXPECT_EQ(params[0].at(2), 0.3);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<D> params{D::parameter({1}, {1.0})};
  AdamState<double> state;
  adam_step(params, {std::vector<double>{1.0}}, state);
  EXPECT_NEAR(params[0].item(), 1.0 - 1e-4, 1e-12);
}

TEST(Adam, RejectsMismatchedGradients) {
  std::vector<D> params{D::parameter({2}, {1.0, 2.0})};
  AdamState<double> state;
  EXPECT_THROW(adam_step(params, {std::vector<double>{1.0}}, state), ShapeError);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    Rng rng(7);
    auto w = kaiming_uniform_init<float>({4, 3}, 3, rng);
    Adam<float> opt({w}, AdamConfig{});
    Tensor<float> x({5, 3}, 0.3f);
    for (int i = 0; i < 5; ++i) {
      GradTape<float> tape;
      opt.zero_grad();
      tape.backward(sum(square(linear(x, w, Tensor<float>()))));
      opt.step();
    }
    return std::vector<float>(w.data().begin(), w.data().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(KaimingUniform, SupportMeanAndSeed) {
  const std::int64_t fan_in = 25;
  const double bound = std::sqrt(6.0 / fan_in);
  auto t = kaiming_uniform_init<double>({100000}, fan_in, 42);
  double s = 0;
  for (auto v : t.data()) {
    EXPECT_LE(std::abs(v), bound);
    s += v;
  }
  const double mean_v = s / 1e5;
  const double sigma = bound / std::sqrt(3.0) / std::sqrt(1e5);  // std of the sample mean
  EXPECT_LT(std::abs(mean_v), 3 * sigma);
  auto again = kaiming_uniform_init<double>({100000}, fan_in, 42);
  EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), again.data().begin()));
  EXPECT_THROW(kaiming_bound(0), std::invalid_argument);
}

}  // namespace
}  // namespace memdef
