// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "memdef/tensor/rng.hpp"
#include "memdef/tensor/tensor.hpp"

namespace memdef::data {

struct AugmentPolicy {
  bool random_crop = false;
  std::int64_t crop_padding = 2;  // reflect padding before cropping back to size

  bool horizontal_flip = false;
  double horizontal_flip_p = 0.5;
  bool vertical_flip = false;
  double vertical_flip_p = 0.5;

  bool random_erase = false;
  double erase_p = 0.5;
  double erase_area_min = 0.02;  // fraction of the image
  double erase_area_max = 0.33;
  double erase_aspect_min = 0.3;
  double erase_aspect_max = 3.3;
  float erase_value = 0.0f;

  double noise_std = 0.0;

  /// Throws std::invalid_argument when a field is out of range.
  void validate() const;
  bool any() const;
};

struct Rect {
  std::int64_t top = 0, left = 0, height = 0, width = 0;
};

/// In-place transforms on one image laid out as [C,H,W].
void flip_horizontal(std::span<float> image, std::int64_t channels, std::int64_t height, std::int64_t width);
void flip_vertical(std::span<float> image, std::int64_t channels, std::int64_t height, std::int64_t width);
void reflect_crop(std::span<float> image, std::int64_t channels, std::int64_t height, std::int64_t width,
                  std::int64_t padding, std::int64_t dy, std::int64_t dx);
/// Draws an erase rectangle; nullopt when no candidate fits in 10 attempts.
std::optional<Rect> sample_erase_rect(const AugmentPolicy& policy, std::int64_t height, std::int64_t width,
                                      Rng& rng);

/// Independent per-image transforms on a [N,C,H,W] batch; output clipped to [0,1].
Tensor<float> augment(const Tensor<float>& batch, const AugmentPolicy& policy, Rng& rng);

}  // namespace memdef::data
