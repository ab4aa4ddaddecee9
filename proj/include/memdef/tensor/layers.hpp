// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memdef/tensor/conv.hpp"
#include "memdef/tensor/rng.hpp"
#include "memdef/tensor/tensor.hpp"

namespace memdef {

/// A named handle into a module's state. Buffers (BN running statistics) are
/// serialised but never optimised.
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

template <typename T>
using TensorList = std::vector<NamedTensor<T>>;

template <typename T>
std::vector<Tensor<T>> trainable_tensors(const TensorList<T>& list) {
  std::vector<Tensor<T>> out;
  for (const auto& item : list)
    if (item.trainable) out.push_back(item.tensor);
  return out;
}

template <typename T>
std::int64_t parameter_count(const TensorList<T>& list) {
  std::int64_t n = 0;
  for (const auto& item : list)
    if (item.trainable) n += static_cast<std::int64_t>(item.tensor.numel());
  return n;
}

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
         ConvGeometry geometry, bool bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, weight_, bias_, geometry_); }
  void collect(const std::string& prefix, TensorList<T>& out) const;

  const Tensor<T>& weight() const { return weight_; }
  const ConvGeometry& geometry() const { return geometry_; }

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
  ConvGeometry geometry_;
};

template <typename T>
class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
                  ConvGeometry geometry, bool bias, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv_transpose2d(x, weight_, bias_, geometry_);
  }
  void collect(const std::string& prefix, TensorList<T>& out) const;

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
  ConvGeometry geometry_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::int64_t channels, T momentum = T(0.1), T eps = T(1e-5));

  /// With track_running = false batch statistics are used in training mode
  /// but the running estimates are left untouched.
  Tensor<T> forward(const Tensor<T>& x, bool training, bool track_running = true) {
    if (!training || track_running)
      return batch_norm2d(x, gamma_, beta_, running_mean_, running_var_, training, momentum_, eps_);
    auto mean = running_mean_.detach(), var = running_var_.detach();
    return batch_norm2d(x, gamma_, beta_, mean, var, training, momentum_, eps_);
  }
  void collect(const std::string& prefix, TensorList<T>& out) const;

 private:
  Tensor<T> gamma_;
  Tensor<T> beta_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
  T momentum_ = T(0.1);
  T eps_ = T(1e-5);
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::int64_t in_features, std::int64_t out_features, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight_, bias_); }
  void collect(const std::string& prefix, TensorList<T>& out) const;

 private:
  Tensor<T> weight_;
  Tensor<T> bias_;
};

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class ConvTranspose2d<float>;
extern template class ConvTranspose2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class Linear<float>;
extern template class Linear<double>;

}  // namespace memdef
