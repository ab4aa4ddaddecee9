// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/nets/networks.hpp"

#include <stdexcept>

#include "memdef/tensor/conv.hpp"
#include "memdef/tensor/ops.hpp"

namespace memdef::nets {
namespace {

LayerSpec conv(std::int64_t in, std::int64_t out, std::int64_t k, std::int64_t stride, std::int64_t pad,
               Activation act, bool bn, std::int64_t output_padding = 0) {
  return LayerSpec{in, out, k, ConvGeometry{stride, pad, output_padding}, act, bn};
}

std::string dims(std::int64_t c, std::int64_t h, std::int64_t w) {
  return std::to_string(c) + "x" + std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "fmnist" || name == "fashion-mnist") return DatasetKind::kFashionMnist;
  if (name == "cifar10" || name == "cifar-10") return DatasetKind::kCifar10;
  throw std::invalid_argument("unknown dataset '" + name + "' (expected fmnist or cifar10)");
}

const char* dataset_name(DatasetKind kind) { return kind == DatasetKind::kFashionMnist ? "fmnist" : "cifar10"; }

ImageSpec image_spec(DatasetKind kind) {
  return kind == DatasetKind::kFashionMnist ? ImageSpec{1, 28, 28} : ImageSpec{3, 32, 32};
}

AutoencoderSpec autoencoder_spec(DatasetKind kind) {
  AutoencoderSpec s;
  s.image = image_spec(kind);
  constexpr auto kLeaky = Activation::kLeakyRelu;
  if (kind == DatasetKind::kFashionMnist) {
    // 28 -> 14 -> 7 -> 4 and back.
    s.encoder = {conv(1, 16, 1, 2, 0, kLeaky, true), conv(16, 32, 3, 2, 1, kLeaky, true),
                 conv(32, 64, 3, 2, 1, Activation::kSigmoid, false)};
    s.decoder = {conv(64, 32, 3, 2, 1, kLeaky, true, 0), conv(32, 16, 3, 2, 1, kLeaky, true, 1),
                 conv(16, 1, 3, 2, 1, Activation::kNone, false, 1)};
  } else {
    // 32 -> 31 -> 30 -> 29 -> 28 and back.
    s.encoder = {conv(3, 64, 2, 1, 0, kLeaky, true), conv(64, 128, 2, 1, 0, kLeaky, true),
                 conv(128, 128, 2, 1, 0, kLeaky, true), conv(128, 256, 2, 1, 0, Activation::kSigmoid, false)};
    s.decoder = {conv(256, 256, 2, 1, 0, kLeaky, true), conv(256, 128, 2, 1, 0, kLeaky, true),
                 conv(128, 128, 2, 1, 0, kLeaky, true), conv(128, 3, 2, 1, 0, Activation::kNone, false)};
  }
  check_autoencoder_spec(s);
  return s;
}

void check_autoencoder_spec(AutoencoderSpec& spec) {
  std::int64_t c = spec.image.channels, h = spec.image.height, w = spec.image.width;
  for (const auto& l : spec.encoder) {
    if (l.in_channels != c) throw GeometryError("encoder expects " + std::to_string(l.in_channels) + " channels, got " + dims(c, h, w));
    h = conv_output_size(h, l.kernel, l.geometry.stride, l.geometry.padding);
    w = conv_output_size(w, l.kernel, l.geometry.stride, l.geometry.padding);
    c = l.out_channels;
  }
  spec.latent_shape = {c, h, w};
  spec.latent_dim = c * h * w;
  for (const auto& l : spec.decoder) {
    if (l.in_channels != c) throw GeometryError("decoder expects " + std::to_string(l.in_channels) + " channels, got " + dims(c, h, w));
    h = conv_transpose_output_size(h, l.kernel, l.geometry.stride, l.geometry.padding, l.geometry.output_padding);
    w = conv_transpose_output_size(w, l.kernel, l.geometry.stride, l.geometry.padding, l.geometry.output_padding);
    c = l.out_channels;
  }
  if (c != spec.image.channels || h != spec.image.height || w != spec.image.width) {
    throw GeometryError("decoder produces " + dims(c, h, w) + ", image is " +
                        dims(spec.image.channels, spec.image.height, spec.image.width));
  }
}

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation activation) {
  switch (activation) {
    case Activation::kLeakyRelu: return leaky_relu(x);
    case Activation::kRelu: return relu(x);
    case Activation::kSigmoid: return sigmoid_act(x);
    case Activation::kNone: break;
  }
  return x;
}

// --- autoencoder ----------------------------------------------------------

template <typename T>
Encoder<T>::Encoder(const AutoencoderSpec& spec, Rng& rng) : spec_(spec) {
  for (const auto& l : spec.encoder) {
    convs_.emplace_back(l.in_channels, l.out_channels, l.kernel, l.geometry, !l.batch_norm, rng);
    norms_.push_back(l.batch_norm ? BatchNorm2d<T>(l.out_channels) : BatchNorm2d<T>());
  }
}

template <typename T>
Tensor<T> Encoder<T>::forward(const Tensor<T>& x, bool training) {
  const auto& img = spec_.image;
  if (x.rank() != 4 || x.dim(1) != img.channels || x.dim(2) != img.height || x.dim(3) != img.width) {
    throw ShapeError("encoder input " + shape_str(x.shape()) + " does not match " +
                     dims(img.channels, img.height, img.width));
  }
  Tensor<T> h = x;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i].forward(h);
    if (spec_.encoder[i].batch_norm) h = norms_[i].forward(h, training);
    h = apply_activation(h, spec_.encoder[i].activation);
  }
  return flatten(h);
}

template <typename T>
void Encoder<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const auto name = prefix + ".conv" + std::to_string(i);
    convs_[i].collect(name, out);
    if (spec_.encoder[i].batch_norm) norms_[i].collect(name + ".bn", out);
  }
}

template <typename T>
Decoder<T>::Decoder(const AutoencoderSpec& spec, Rng& rng) : spec_(spec) {
  for (const auto& l : spec.decoder) {
    convs_.emplace_back(l.in_channels, l.out_channels, l.kernel, l.geometry, !l.batch_norm, rng);
    norms_.push_back(l.batch_norm ? BatchNorm2d<T>(l.out_channels) : BatchNorm2d<T>());
  }
}

template <typename T>
Tensor<T> Decoder<T>::forward(const Tensor<T>& z, bool training, bool track_running) {
  if (z.rank() != 2 || z.dim(1) != spec_.latent_dim) {
    throw ShapeError("decoder input " + shape_str(z.shape()) + ", expected [B," + std::to_string(spec_.latent_dim) + "]");
  }
  Tensor<T> h = reshape(z, {z.dim(0), spec_.latent_shape[0], spec_.latent_shape[1], spec_.latent_shape[2]});
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    h = convs_[i].forward(h);
    if (spec_.decoder[i].batch_norm) h = norms_[i].forward(h, training, track_running);
    h = apply_activation(h, spec_.decoder[i].activation);
  }
  return h;
}

template <typename T>
void Decoder<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    const auto name = prefix + ".deconv" + std::to_string(i);
    convs_[i].collect(name, out);
    if (spec_.decoder[i].batch_norm) norms_[i].collect(name + ".bn", out);
  }
}

// --- classifier-B -----------------------------------------------------------

template <typename T>
ClassifierB<T>::ClassifierB(const ImageSpec& image, Rng& rng) : image_(image) {
  conv1_ = Conv2d<T>(image.channels, 6, 5, ConvGeometry{}, true, rng);
  conv2_ = Conv2d<T>(6, 16, 5, ConvGeometry{}, true, rng);
  auto side = [](std::int64_t s) { return (conv_output_size(s, 5, 1, 0) - 2) / 2 + 1; };
  const auto h = side(side(image.height)), w = side(side(image.width));
  flat_ = 16 * h * w;
  fc1_ = Linear<T>(flat_, 256, rng);
  fc2_ = Linear<T>(256, 128, rng);
  fc3_ = Linear<T>(128, 10, rng);
}

template <typename T>
Tensor<T> ClassifierB<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != image_.channels || x.dim(2) != image_.height || x.dim(3) != image_.width) {
    throw ShapeError("classifier input " + shape_str(x.shape()) + " does not match " +
                     dims(image_.channels, image_.height, image_.width));
  }
  auto h = relu(max_pool2d(conv1_.forward(x), 2, 2));
  h = relu(max_pool2d(conv2_.forward(h), 2, 2));
  h = relu(fc1_.forward(flatten(h)));
  h = relu(fc2_.forward(h));
  return fc3_.forward(h);
}

template <typename T>
void ClassifierB<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  conv1_.collect(prefix + ".conv0", out);
  conv2_.collect(prefix + ".conv1", out);
  fc1_.collect(prefix + ".fc0", out);
  fc2_.collect(prefix + ".fc1", out);
  fc3_.collect(prefix + ".fc2", out);
}

// --- residual selector ------------------------------------------------------

template <typename T>
ResidualSelector<T>::ResidualSelector(const ImageSpec& image, const SelectorSpec& spec, Rng& rng)
    : image_(image), spec_(spec) {
  if (spec.widths.empty() || spec.widths.size() != spec.blocks.size()) {
    throw std::invalid_argument("selector widths and blocks must be non-empty and of equal length");
  }
  stem_ = Conv2d<T>(image.channels, spec.widths[0], 3, ConvGeometry{1, 1, 0}, false, rng);
  stem_bn_ = BatchNorm2d<T>(spec.widths[0]);
  std::int64_t in = spec.widths[0];
  for (std::size_t stage = 0; stage < spec.widths.size(); ++stage) {
    for (int b = 0; b < spec.blocks[stage]; ++b) {
      const std::int64_t out = spec.widths[stage];
      const std::int64_t stride = (stage > 0 && b == 0) ? 2 : 1;
      Block block;
      block.conv1 = Conv2d<T>(in, out, 3, ConvGeometry{stride, 1, 0}, false, rng);
      block.bn1 = BatchNorm2d<T>(out);
      block.conv2 = Conv2d<T>(out, out, 3, ConvGeometry{1, 1, 0}, false, rng);
      block.bn2 = BatchNorm2d<T>(out);
      block.projection = stride != 1 || in != out;
      if (block.projection) {
        block.shortcut = Conv2d<T>(in, out, 1, ConvGeometry{stride, 0, 0}, false, rng);
        block.bn_shortcut = BatchNorm2d<T>(out);
      }
      blocks_.push_back(std::move(block));
      in = out;
    }
  }
  head_ = Linear<T>(in, spec.classes, rng);
}

template <typename T>
Tensor<T> ResidualSelector<T>::forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 4 || x.dim(1) != image_.channels) throw ShapeError("selector input " + shape_str(x.shape()));
  auto h = relu(stem_bn_.forward(stem_.forward(x), training));
  for (auto& b : blocks_) {
    auto y = relu(b.bn1.forward(b.conv1.forward(h), training));
    y = b.bn2.forward(b.conv2.forward(y), training);
    auto skip = b.projection ? b.bn_shortcut.forward(b.shortcut.forward(h), training) : h;
    h = relu(add(y, skip));
  }
  return head_.forward(global_avg_pool2d(h));
}

template <typename T>
void ResidualSelector<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  stem_.collect(prefix + ".stem", out);
  stem_bn_.collect(prefix + ".stem.bn", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto name = prefix + ".block" + std::to_string(i);
    blocks_[i].conv1.collect(name + ".conv1", out);
    blocks_[i].bn1.collect(name + ".bn1", out);
    blocks_[i].conv2.collect(name + ".conv2", out);
    blocks_[i].bn2.collect(name + ".bn2", out);
    if (blocks_[i].projection) {
      blocks_[i].shortcut.collect(name + ".shortcut", out);
      blocks_[i].bn_shortcut.collect(name + ".shortcut.bn", out);
    }
  }
  head_.collect(prefix + ".head", out);
}

// --- prediction -------------------------------------------------------------

template <typename T>
Prediction<T> predict_from_logits(const Tensor<T>& logits) {
  Prediction<T> p;
  p.probs = softmax(logits.detach());
  p.classes = argmax_rows(logits);
  return p;
}

template <typename T>
Prediction<T> selector_predict(ResidualSelector<T>& selector, const Tensor<T>& x) {
  return predict_from_logits(selector.forward(x, false));
}

template <typename T>
Prediction<T> target_classify(const ClassifierB<T>& classifier, const Tensor<T>& x_hat) {
  return predict_from_logits(classifier.forward(x_hat));
}

#define MEMDEF_INSTANTIATE_NETS(T)                                                        \
  template class Encoder<T>;                                                              \
  template class Decoder<T>;                                                              \
  template class ClassifierB<T>;                                                          \
  template class ResidualSelector<T>;                                                     \
  template Tensor<T> apply_activation(const Tensor<T>&, Activation);                     \
  template Prediction<T> predict_from_logits(const Tensor<T>&);                           \
  template Prediction<T> selector_predict(ResidualSelector<T>&, const Tensor<T>&);        \
  template Prediction<T> target_classify(const ClassifierB<T>&, const Tensor<T>&);

MEMDEF_INSTANTIATE_NETS(float)
MEMDEF_INSTANTIATE_NETS(double)

}  // namespace memdef::nets
