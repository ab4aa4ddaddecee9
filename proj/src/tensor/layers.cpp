// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/tensor/layers.hpp"

#include "memdef/tensor/init.hpp"
#include "memdef/tensor/ops.hpp"

namespace memdef {

template <typename T>
Conv2d<T>::Conv2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kernel,
                  ConvGeometry geometry, bool bias, Rng& rng)
    : geometry_(geometry) {
  weight_ = kaiming_uniform_init<T>({out_channels, in_channels, kernel, kernel},
                                    in_channels * kernel * kernel, rng);
  if (bias) bias_ = Tensor<T>::parameter({out_channels}, std::vector<T>(out_channels, T(0)));
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  out.push_back({prefix + ".weight", weight_, true});
  if (bias_.defined()) out.push_back({prefix + ".bias", bias_, true});
}

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::int64_t in_channels, std::int64_t out_channels,
                                    std::int64_t kernel, ConvGeometry geometry, bool bias, Rng& rng)
    : geometry_(geometry) {
  weight_ = kaiming_uniform_init<T>({in_channels, out_channels, kernel, kernel},
                                    out_channels * kernel * kernel, rng);
  if (bias) bias_ = Tensor<T>::parameter({out_channels}, std::vector<T>(out_channels, T(0)));
}

template <typename T>
void ConvTranspose2d<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  out.push_back({prefix + ".weight", weight_, true});
  if (bias_.defined()) out.push_back({prefix + ".bias", bias_, true});
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::int64_t channels, T momentum, T eps)
    : gamma_(Tensor<T>::parameter({channels}, std::vector<T>(channels, T(1)))),
      beta_(Tensor<T>::parameter({channels}, std::vector<T>(channels, T(0)))),
      running_mean_(Shape{channels}, T(0)),
      running_var_(Shape{channels}, T(1)),
      momentum_(momentum),
      eps_(eps) {}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  out.push_back({prefix + ".gamma", gamma_, true});
  out.push_back({prefix + ".beta", beta_, true});
  out.push_back({prefix + ".running_mean", running_mean_, false});
  out.push_back({prefix + ".running_var", running_var_, false});
}

template <typename T>
Linear<T>::Linear(std::int64_t in_features, std::int64_t out_features, Rng& rng)
    : weight_(kaiming_uniform_init<T>({out_features, in_features}, in_features, rng)),
      bias_(Tensor<T>::parameter({out_features}, std::vector<T>(out_features, T(0)))) {}

template <typename T>
void Linear<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  out.push_back({prefix + ".weight", weight_, true});
  out.push_back({prefix + ".bias", bias_, true});
}

template class Conv2d<float>;
template class Conv2d<double>;
template class ConvTranspose2d<float>;
template class ConvTranspose2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class Linear<float>;
template class Linear<double>;

}  // namespace memdef
