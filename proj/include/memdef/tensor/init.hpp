// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "memdef/tensor/rng.hpp"
#include "memdef/tensor/tensor.hpp"

namespace memdef {

/// Gain for a ReLU-family nonlinearity with negative slope 0: sqrt(2).
inline constexpr double kKaimingGain = 1.4142135623730951;

/// Bound of the Kaiming-uniform distribution: gain * sqrt(3 / fan_in),
/// i.e. sqrt(6 / fan_in) with the default gain.
inline double kaiming_bound(std::int64_t fan_in, double gain = kKaimingGain) {
  if (fan_in <= 0) throw std::invalid_argument("kaiming init needs fan_in > 0");
  return gain * std::sqrt(3.0 / static_cast<double>(fan_in));
}

template <typename T>
std::vector<T> kaiming_uniform_values(std::int64_t count, std::int64_t fan_in, Rng& rng,
                                      double gain = kKaimingGain) {
  const double bound = kaiming_bound(fan_in, gain);
  std::vector<T> values(static_cast<std::size_t>(count));
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return values;
}

/// Fresh trainable tensor with i.i.d. U(-bound, bound) entries.
template <typename T>
Tensor<T> kaiming_uniform_init(const Shape& shape, std::int64_t fan_in, Rng& rng,
                               double gain = kKaimingGain) {
  return Tensor<T>::parameter(shape, kaiming_uniform_values<T>(shape_numel(shape), fan_in, rng, gain));
}

template <typename T>
Tensor<T> kaiming_uniform_init(const Shape& shape, std::int64_t fan_in, std::uint64_t seed,
                               double gain = kKaimingGain) {
  Rng rng(seed);
  return kaiming_uniform_init<T>(shape, fan_in, rng, gain);
}

}  // namespace memdef
