// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "memdef/tensor/tensor.hpp"

namespace memdef {

enum class Reduction { kMean, kSum };

// Elementwise arithmetic. Operands must have identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);
template <typename T> Tensor<T> square(const Tensor<T>& a);

template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// Sum over every axis but the first: [B, ...] -> [B].
template <typename T> Tensor<T> sum_per_sample(const Tensor<T>& a);
/// Scales sample b of a [B, ...] tensor by weights[b].
template <typename T> Tensor<T> scale_per_sample(const Tensor<T>& a, std::span<const T> weights);

template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);
/// [B, ...] -> [B, prod(...)]
template <typename T> Tensor<T> flatten(const Tensor<T>& a);

/// [M,K] x [K,N] -> [M,N]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// x[B,in] . weight[out,in]^T + bias[out]; bias may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.25));
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid_act(const Tensor<T>& x);
template <typename T> Tensor<T> tanh_act(const Tensor<T>& x);

/// Softmax and log-softmax along the last axis, max-subtracted.
template <typename T> Tensor<T> softmax(const Tensor<T>& logits);
template <typename T> Tensor<T> log_softmax(const Tensor<T>& logits);

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                        Reduction reduction = Reduction::kMean);
template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b, Reduction reduction = Reduction::kMean);

// Non-differentiable helpers.
template <typename T> std::vector<int> argmax_rows(const Tensor<T>& scores);
template <typename T> Tensor<T> slice_batch(const Tensor<T>& a, std::int64_t begin, std::int64_t end);
template <typename T> Tensor<T> gather_batch(const Tensor<T>& a, std::span<const std::int64_t> rows);
template <typename T> Tensor<T> concat_batch(std::span<const Tensor<T>> parts);
template <typename T> Tensor<T> clamp_values(const Tensor<T>& a, T lo, T hi);
template <typename T> double dot_product(const Tensor<T>& a, const Tensor<T>& b);

template <typename To, typename From> Tensor<To> cast(const Tensor<From>& a);

}  // namespace memdef
