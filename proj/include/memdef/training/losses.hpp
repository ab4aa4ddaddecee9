// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "memdef/tensor/tensor.hpp"

namespace memdef::training {

struct LossConfig {
  double alpha = 2e-4;  // entropy weight
  double beta = 1e-4;   // non-target penalty factor
  double gamma = 1.0;   // classifier-B cross-entropy weight
  int classes = 10;     // N

  void validate() const;
};

/// (1/B) * sum over every pixel of (x - x_hat)^2.
template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& x, const Tensor<T>& x_hat);

/// reconstruction_loss(x, x_hat) + alpha * sum(-w log w).
template <typename T>
Tensor<T> target_loss(const Tensor<T>& x, const Tensor<T>& x_hat, const Tensor<T>& w, double alpha);

/// Same form on the non-target reconstruction and weights.
template <typename T>
Tensor<T> non_target_loss(const Tensor<T>& x, const Tensor<T>& x_prime, const Tensor<T>& w_hat, double alpha);

/// L_t - beta * sigmoid(L_nt / (N - 1)). Throws NumericError on non-finite input.
template <typename T>
Tensor<T> total_loss(const Tensor<T>& target, const Tensor<T>& non_target, const LossConfig& cfg);

}  // namespace memdef::training
