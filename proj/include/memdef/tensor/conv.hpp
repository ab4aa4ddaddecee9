// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "memdef/tensor/tensor.hpp"

namespace memdef {

struct ConvGeometry {
  std::int64_t stride = 1;
  std::int64_t padding = 0;
  std::int64_t output_padding = 0;  // transposed convolution only
};

/// floor((size + 2*padding - kernel)/stride) + 1; throws GeometryError when
/// the result would be empty.
std::int64_t conv_output_size(std::int64_t size, std::int64_t kernel, std::int64_t stride,
                              std::int64_t padding);
/// (size - 1)*stride - 2*padding + kernel + output_padding
std::int64_t conv_transpose_output_size(std::int64_t size, std::int64_t kernel,
                                        std::int64_t stride, std::int64_t padding,
                                        std::int64_t output_padding);

/// input[B,C,H,W] * kernel[F,C,Kh,Kw] (+ bias[F]) -> [B,F,H',W'].
/// Lowered to one matrix product per image through im2col.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 ConvGeometry geometry);
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, std::int64_t stride = 1,
                 std::int64_t padding = 0) {
  return conv2d(input, kernel, Tensor<T>(), ConvGeometry{stride, padding, 0});
}

/// Adjoint of conv2d with the same kernel: input[B,Cin,H,W], kernel[Cin,Cout,Kh,Kw].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                           ConvGeometry geometry);
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& kernel,
                           std::int64_t stride = 1, std::int64_t padding = 0,
                           std::int64_t output_padding = 0) {
  return conv_transpose2d(input, kernel, Tensor<T>(),
                          ConvGeometry{stride, padding, output_padding});
}

/// Windowed max without padding; ties resolve to the first element in
/// row-major window order.
template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, std::int64_t kernel, std::int64_t stride);

/// [B,C,H,W] -> [B,C]
template <typename T>
Tensor<T> global_avg_pool2d(const Tensor<T>& input);

/// Per-channel batch normalisation. In training mode batch statistics are
/// used and the running buffers are updated in place with `momentum`
/// (unbiased variance, as the running estimate).
template <typename T>
Tensor<T> batch_norm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                       Tensor<T>& running_mean, Tensor<T>& running_var, bool training,
                       T momentum = T(0.1), T eps = T(1e-5));

}  // namespace memdef
