// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "memdef/tensor/layers.hpp"
#include "memdef/tensor/rng.hpp"
#include "memdef/tensor/tensor.hpp"

namespace memdef::nets {

enum class DatasetKind { kFashionMnist, kCifar10 };

DatasetKind parse_dataset_kind(const std::string& name);
const char* dataset_name(DatasetKind kind);

struct ImageSpec {
  std::int64_t channels = 1;
  std::int64_t height = 28;
  std::int64_t width = 28;

  std::int64_t pixels() const { return channels * height * width; }
  bool operator==(const ImageSpec&) const = default;
};

ImageSpec image_spec(DatasetKind kind);

enum class Activation { kNone, kLeakyRelu, kRelu, kSigmoid };

struct LayerSpec {
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t kernel = 1;
  ConvGeometry geometry;
  Activation activation = Activation::kNone;
  bool batch_norm = false;
};

struct AutoencoderSpec {
  ImageSpec image;
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> decoder;
  Shape latent_shape;  // [C,H,W] of the bottleneck map
  std::int64_t latent_dim = 0;
};

/// Layer stacks for a dataset with the whole shape pipeline checked;
/// throws GeometryError if the decoder does not close on the image shape.
AutoencoderSpec autoencoder_spec(DatasetKind kind);
void check_autoencoder_spec(AutoencoderSpec& spec);

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation activation);

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const AutoencoderSpec& spec, Rng& rng);

  /// x [B,C,H,W] -> z [B,d] with z in (0,1).
  Tensor<T> forward(const Tensor<T>& x, bool training);
  void collect(const std::string& prefix, TensorList<T>& out) const;
  std::int64_t latent_dim() const { return spec_.latent_dim; }

 private:
  AutoencoderSpec spec_;
  std::vector<Conv2d<T>> convs_;
  std::vector<BatchNorm2d<T>> norms_;
};

template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const AutoencoderSpec& spec, Rng& rng);

  /// z [B,d] -> raw reconstruction [B,C,H,W] (not clipped).
  Tensor<T> forward(const Tensor<T>& z, bool training, bool track_running = true);
  void collect(const std::string& prefix, TensorList<T>& out) const;

 private:
  AutoencoderSpec spec_;
  std::vector<ConvTranspose2d<T>> convs_;
  std::vector<BatchNorm2d<T>> norms_;
};

/// Small target classifier: two conv+pool+ReLU stages, three linear layers.
template <typename T>
class ClassifierB {
 public:
  ClassifierB() = default;
  ClassifierB(const ImageSpec& image, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, TensorList<T>& out) const;
  std::int64_t flat_features() const { return flat_; }

 private:
  ImageSpec image_;
  Conv2d<T> conv1_, conv2_;
  Linear<T> fc1_, fc2_, fc3_;
  std::int64_t flat_ = 0;
};

struct SelectorSpec {
  std::vector<std::int64_t> widths{16, 32, 64, 128};
  std::vector<int> blocks{2, 2, 2, 2};  // basic blocks per stage; first stage keeps resolution
  int classes = 10;
};

/// Residual classifier: conv stem, basic-block stages, global average pool, linear head.
template <typename T>
class ResidualSelector {
 public:
  ResidualSelector() = default;
  ResidualSelector(const ImageSpec& image, const SelectorSpec& spec, Rng& rng);

  Tensor<T> forward(const Tensor<T>& x, bool training);
  void collect(const std::string& prefix, TensorList<T>& out) const;

 private:
  struct Block {
    Conv2d<T> conv1, conv2, shortcut;
    BatchNorm2d<T> bn1, bn2, bn_shortcut;
    bool projection = false;
  };
  ImageSpec image_;
  SelectorSpec spec_;
  Conv2d<T> stem_;
  BatchNorm2d<T> stem_bn_;
  std::vector<Block> blocks_;
  Linear<T> head_;
};

template <typename T>
struct Prediction {
  std::vector<int> classes;  // argmax, lowest index on ties
  Tensor<T> probs;           // [B,K]
};

template <typename T>
Prediction<T> predict_from_logits(const Tensor<T>& logits);

/// Eval-mode selector prediction.
template <typename T>
Prediction<T> selector_predict(ResidualSelector<T>& selector, const Tensor<T>& x);

template <typename T>
Prediction<T> target_classify(const ClassifierB<T>& classifier, const Tensor<T>& x_hat);

extern template class Encoder<float>;
extern template class Encoder<double>;
extern template class Decoder<float>;
extern template class Decoder<double>;
extern template class ClassifierB<float>;
extern template class ClassifierB<double>;
extern template class ResidualSelector<float>;
extern template class ResidualSelector<double>;

}  // namespace memdef::nets
