// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/training/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "memdef/memory/attention.hpp"
#include "memdef/tensor/ops.hpp"

namespace memdef::training {

void LossConfig::validate() const {
  if (!(alpha >= 0) || !(beta >= 0) || !(gamma >= 0))
    throw std::invalid_argument("loss weights alpha, beta, gamma must be >= 0");
  if (classes < 2) throw std::invalid_argument("loss needs at least 2 classes, got " + std::to_string(classes));
}

template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& x, const Tensor<T>& x_hat) {
  if (x.shape() != x_hat.shape())
    throw ShapeError("reconstruction shape " + shape_str(x_hat.shape()) + " does not match input " +
                     shape_str(x.shape()));
  if (x.rank() == 0 || x.dim(0) == 0) throw ShapeError("reconstruction loss needs a non-empty batch");
  return scale(mse(x_hat, x, Reduction::kSum), T(1) / static_cast<T>(x.dim(0)));
}

template <typename T>
Tensor<T> target_loss(const Tensor<T>& x, const Tensor<T>& x_hat, const Tensor<T>& w, double alpha) {
  auto loss = reconstruction_loss(x, x_hat);
  if (alpha == 0.0) return loss;
  return add(loss, scale(attention_entropy(w), static_cast<T>(alpha)));
}

template <typename T>
Tensor<T> non_target_loss(const Tensor<T>& x, const Tensor<T>& x_prime, const Tensor<T>& w_hat, double alpha) {
  return target_loss(x, x_prime, w_hat, alpha);
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& target, const Tensor<T>& non_target, const LossConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(static_cast<double>(target.item())) || !std::isfinite(static_cast<double>(non_target.item())))
    throw NumericError("total_loss: non-finite loss term (target " + std::to_string(target.item()) +
                       ", non-target " + std::to_string(non_target.item()) + ")");
  auto squashed = sigmoid_act(scale(non_target, T(1) / static_cast<T>(cfg.classes - 1)));
  return sub(target, scale(squashed, static_cast<T>(cfg.beta)));
}

#define MEMDEF_INSTANTIATE(T)                                                                         \
  template Tensor<T> reconstruction_loss(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> target_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);       \
  template Tensor<T> non_target_loss(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);   \
  template Tensor<T> total_loss(const Tensor<T>&, const Tensor<T>&, const LossConfig&);

MEMDEF_INSTANTIATE(float)
MEMDEF_INSTANTIATE(double)
#undef MEMDEF_INSTANTIATE

}  // namespace memdef::training
