// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace memdef::data {
namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace

void AugmentPolicy::validate() const {
  check_probability(horizontal_flip_p, "horizontal_flip_p");
  check_probability(vertical_flip_p, "vertical_flip_p");
  check_probability(erase_p, "erase_p");
  check_probability(erase_area_min, "erase_area_min");
  check_probability(erase_area_max, "erase_area_max");
  if (erase_area_min > erase_area_max) throw std::invalid_argument("erase area range is empty");
  if (!(erase_aspect_min > 0.0) || erase_aspect_min > erase_aspect_max) {
    throw std::invalid_argument("erase aspect range must be positive and non-empty");
  }
  if (!(noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (crop_padding < 0) throw std::invalid_argument("crop_padding must be >= 0");
}

bool AugmentPolicy::any() const {
  return random_crop || horizontal_flip || vertical_flip || random_erase || noise_std > 0.0;
}

void flip_horizontal(std::span<float> image, std::int64_t channels, std::int64_t height, std::int64_t width) {
  for (std::int64_t c = 0; c < channels; ++c) {
    for (std::int64_t y = 0; y < height; ++y) {
      auto* r = image.data() + (c * height + y) * width;
      std::reverse(r, r + width);
    }
  }
}

void flip_vertical(std::span<float> image, std::int64_t channels, std::int64_t height, std::int64_t width) {
  for (std::int64_t c = 0; c < channels; ++c) {
    auto* plane = image.data() + c * height * width;
    for (std::int64_t y = 0; y < height / 2; ++y) {
      std::swap_ranges(plane + y * width, plane + (y + 1) * width, plane + (height - 1 - y) * width);
    }
  }
}

void reflect_crop(std::span<float> image, std::int64_t channels, std::int64_t height, std::int64_t width,
                  std::int64_t padding, std::int64_t dy, std::int64_t dx) {
  if (dy < 0 || dx < 0 || dy > 2 * padding || dx > 2 * padding) throw std::invalid_argument("crop offset out of range");
  std::vector<float> src(image.begin(), image.end());
  for (std::int64_t c = 0; c < channels; ++c) {
    const float* in = src.data() + c * height * width;
    float* out = image.data() + c * height * width;
    for (std::int64_t y = 0; y < height; ++y) {
      const auto sy = reflect_index(y + dy - padding, height);
      for (std::int64_t x = 0; x < width; ++x) {
        out[y * width + x] = in[sy * width + reflect_index(x + dx - padding, width)];
      }
    }
  }
}

std::optional<Rect> sample_erase_rect(const AugmentPolicy& policy, std::int64_t height, std::int64_t width,
                                      Rng& rng) {
  const double area = static_cast<double>(height * width);
  const double log_lo = std::log(policy.erase_aspect_min), log_hi = std::log(policy.erase_aspect_max);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = rng.uniform(policy.erase_area_min, policy.erase_area_max) * area;
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto h = static_cast<std::int64_t>(std::lround(std::sqrt(target * aspect)));
    const auto w = static_cast<std::int64_t>(std::lround(std::sqrt(target / aspect)));
    if (h < 1 || w < 1 || h > height || w > width) continue;
    const double frac = static_cast<double>(h * w) / area;
    if (frac < policy.erase_area_min || frac > policy.erase_area_max) continue;
    Rect r;
    r.height = h;
    r.width = w;
    r.top = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
    r.left = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
    return r;
  }
  return std::nullopt;
}

Tensor<float> augment(const Tensor<float>& batch, const AugmentPolicy& policy, Rng& rng) {
  policy.validate();
  if (batch.rank() != 4) throw ShapeError("augment expects [N,C,H,W]");
  const auto n = batch.dim(0), c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor<float> out = batch.detach();
  if (!policy.any()) return out;
  auto all = out.mutable_data();
  const auto per = c * h * w;
  for (std::int64_t i = 0; i < n; ++i) {
    auto image = all.subspan(i * per, per);
    if (policy.random_crop && policy.crop_padding > 0) {
      const auto span = static_cast<std::uint64_t>(2 * policy.crop_padding + 1);
      const auto dy = static_cast<std::int64_t>(rng.below(span));
      const auto dx = static_cast<std::int64_t>(rng.below(span));
      reflect_crop(image, c, h, w, policy.crop_padding, dy, dx);
    }
    if (policy.horizontal_flip && rng.bernoulli(policy.horizontal_flip_p)) flip_horizontal(image, c, h, w);
    if (policy.vertical_flip && rng.bernoulli(policy.vertical_flip_p)) flip_vertical(image, c, h, w);
    if (policy.random_erase && rng.bernoulli(policy.erase_p)) {
      if (auto r = sample_erase_rect(policy, h, w, rng)) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          for (std::int64_t y = r->top; y < r->top + r->height; ++y) {
            std::fill_n(image.data() + (ch * h + y) * w + r->left, r->width, policy.erase_value);
          }
        }
      }
    }
    if (policy.noise_std > 0.0) {
      for (auto& v : image) v += static_cast<float>(policy.noise_std * rng.normal());
    }
    for (auto& v : image) v = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

}  // namespace memdef::data
