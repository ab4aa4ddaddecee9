// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/tensor/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace memdef {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(a.shape()));
  }
}

// Shared skeleton for unary elementwise ops: `fwd(x)` and `dfdx(x, y)`.
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, const char* name, Fwd fwd, Deriv deriv) {
  Tensor<T> out(x.shape());
  auto xs = x.data();
  auto ys = out.mutable_data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
  autograd::check_finite(out, name);
  if (autograd::wants_grad(x)) {
    autograd::attach(out, [x, out, deriv]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* gx = autograd::grad_buffer(x);
      auto xs = x.data();
      auto ys = out.data();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xs[i], ys[i]);
    });
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] + b.data()[i];
  bool ga = autograd::wants_grad(a), gb = autograd::wants_grad(b);
  if (ga || gb) {
    autograd::attach(out, [a, b, out, ga, gb]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      if (ga) {
        T* d = autograd::grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (gb) {
        T* d = autograd::grad_buffer(b);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] - b.data()[i];
  bool ga = autograd::wants_grad(a), gb = autograd::wants_grad(b);
  if (ga || gb) {
    autograd::attach(out, [a, b, out, ga, gb]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      if (ga) {
        T* d = autograd::grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
      if (gb) {
        T* d = autograd::grad_buffer(b);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] * b.data()[i];
  bool ga = autograd::wants_grad(a), gb = autograd::wants_grad(b);
  if (ga || gb) {
    autograd::attach(out, [a, b, out, ga, gb]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      if (ga) {
        T* d = autograd::grad_buffer(a);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * b.data()[i];
      }
      if (gb) {
        T* d = autograd::grad_buffer(b);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(
      a, "scale", [factor](T x) { return x * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  return unary(
      a, "add_scalar", [value](T x) { return x + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  return unary(
      a, "square", [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (auto v : a.data()) total += v;
  auto out = Tensor<T>::scalar(total);
  if (autograd::wants_grad(a)) {
    autograd::attach(out, [a, out]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(a);
      for (std::size_t i = 0; i < a.numel(); ++i) d[i] += g[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> sum_per_sample(const Tensor<T>& a) {
  if (a.rank() < 1) throw ShapeError("sum_per_sample: need a batch axis");
  const auto batch = static_cast<std::size_t>(a.dim(0));
  const std::size_t inner = batch == 0 ? 0 : a.numel() / batch;
  Tensor<T> out(Shape{a.dim(0)});
  auto o = out.mutable_data();
  for (std::size_t b = 0; b < batch; ++b) {
    T s = 0;
    for (std::size_t i = 0; i < inner; ++i) s += a.data()[b * inner + i];
    o[b] = s;
  }
  if (autograd::wants_grad(a)) {
    autograd::attach(out, [a, out, batch, inner]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(a);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < inner; ++i) d[b * inner + i] += g[b];
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_per_sample(const Tensor<T>& a, std::span<const T> weights) {
  if (a.rank() < 1 || static_cast<std::size_t>(a.dim(0)) != weights.size()) {
    throw ShapeError("scale_per_sample: weight count does not match batch of " +
                     shape_str(a.shape()));
  }
  const std::size_t batch = weights.size();
  const std::size_t inner = batch == 0 ? 0 : a.numel() / batch;
  std::vector<T> w(weights.begin(), weights.end());
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < inner; ++i) o[b * inner + i] = a.data()[b * inner + i] * w[b];
  if (autograd::wants_grad(a)) {
    autograd::attach(out, [a, out, w, inner]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(a);
      for (std::size_t b = 0; b < w.size(); ++b)
        for (std::size_t i = 0; i < inner; ++i) d[b * inner + i] += g[b * inner + i] * w[b];
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (static_cast<std::size_t>(shape_numel(shape)) != a.numel()) {
    throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(a.data().begin(), a.data().end()));
  if (autograd::wants_grad(a)) {
    autograd::attach(out, [a, out]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& a) {
  if (a.rank() < 1) throw ShapeError("flatten: need a batch axis");
  const auto batch = a.dim(0);
  return reshape(a, Shape{batch, batch == 0 ? 0 : static_cast<std::int64_t>(a.numel()) / batch});
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out(Shape{m, n});
  MapMat<T>(out.mutable_data().data(), m, n).noalias() =
      CMapMat<T>(a.ptr(), m, k) * CMapMat<T>(b.ptr(), k, n);
  bool ga = autograd::wants_grad(a), gb = autograd::wants_grad(b);
  if (ga || gb) {
    autograd::attach(out, [a, b, out, ga, gb, m, k, n]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      CMapMat<T> gm(g.data(), m, n);
      if (ga) MapMat<T>(autograd::grad_buffer(a), m, k).noalias() += gm * CMapMat<T>(b.ptr(), k, n).transpose();
      if (gb) MapMat<T>(autograd::grad_buffer(b), k, n).noalias() += CMapMat<T>(a.ptr(), m, k).transpose() * gm;
    });
  }
  return out;
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const auto batch = x.dim(0), in = x.dim(1), out_features = weight.dim(0);
  if (weight.dim(1) != in) {
    throw ShapeError("linear: input width " + std::to_string(in) + " vs weight " +
                     shape_str(weight.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != out_features)) {
    throw ShapeError("linear: bias shape " + shape_str(bias.shape()));
  }
  Tensor<T> out(Shape{batch, out_features});
  MapMat<T> y(out.mutable_data().data(), batch, out_features);
  y.noalias() = CMapMat<T>(x.ptr(), batch, in) * CMapMat<T>(weight.ptr(), out_features, in).transpose();
  if (has_bias) {
    for (std::int64_t r = 0; r < batch; ++r)
      for (std::int64_t c = 0; c < out_features; ++c) y(r, c) += bias.data()[c];
  }
  bool gx = autograd::wants_grad(x), gw = autograd::wants_grad(weight);
  bool gbias = has_bias && autograd::wants_grad(bias);
  if (gx || gw || gbias) {
    autograd::attach(out, [x, weight, bias, out, gx, gw, gbias, batch, in, out_features]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      CMapMat<T> gm(g.data(), batch, out_features);
      if (gx) {
        MapMat<T>(autograd::grad_buffer(x), batch, in).noalias() +=
            gm * CMapMat<T>(weight.ptr(), out_features, in);
      }
      if (gw) {
        MapMat<T>(autograd::grad_buffer(weight), out_features, in).noalias() +=
            gm.transpose() * CMapMat<T>(x.ptr(), batch, in);
      }
      if (gbias) {
        T* d = autograd::grad_buffer(bias);
        for (std::int64_t r = 0; r < batch; ++r)
          for (std::int64_t c = 0; c < out_features; ++c) d[c] += gm(r, c);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return unary(
      x, "leaky_relu", [slope](T v) { return v > 0 ? v : slope * v; },
      [slope](T v, T) { return v > 0 ? T(1) : slope; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, "relu", [](T v) { return v > 0 ? v : T(0); }, [](T v, T) { return v > 0 ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sigmoid_act(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        if (v >= 0) return T(1) / (T(1) + std::exp(-v));
        T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> tanh_act(const Tensor<T>& x) {
  return unary(
      x, "tanh", [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

namespace {

template <typename T>
std::pair<std::size_t, std::size_t> rows_cols(const Tensor<T>& t, const char* op) {
  if (t.rank() < 1 || t.numel() == 0) throw ShapeError(std::string(op) + ": empty input");
  const auto cols = static_cast<std::size_t>(t.shape().back());
  return {t.numel() / cols, cols};
}

}  // namespace

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  auto [rows, cols] = rows_cols(logits, "softmax");
  Tensor<T> out(logits.shape());
  auto o = out.mutable_data();
  auto in = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in.data() + r * cols;
    T* dst = o.data() + r * cols;
    T mx = *std::max_element(row, row + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += (dst[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) dst[c] /= total;
  }
  autograd::check_finite(out, "softmax");
  if (autograd::wants_grad(logits)) {
    autograd::attach(out, [logits, out, rows, cols]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(logits);
      auto y = out.data();
      for (std::size_t r = 0; r < rows; ++r) {
        T inner = 0;
        for (std::size_t c = 0; c < cols; ++c) inner += g[r * cols + c] * y[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          d[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - inner);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& logits) {
  auto [rows, cols] = rows_cols(logits, "log_softmax");
  Tensor<T> out(logits.shape());
  auto o = out.mutable_data();
  auto in = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = in.data() + r * cols;
    T mx = *std::max_element(row, row + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(row[c] - mx);
    T lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) o[r * cols + c] = row[c] - lse;
  }
  autograd::check_finite(out, "log_softmax");
  if (autograd::wants_grad(logits)) {
    autograd::attach(out, [logits, out, rows, cols]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(logits);
      auto y = out.data();
      for (std::size_t r = 0; r < rows; ++r) {
        T gsum = 0;
        for (std::size_t c = 0; c < cols; ++c) gsum += g[r * cols + c];
        for (std::size_t c = 0; c < cols; ++c)
          d[r * cols + c] += g[r * cols + c] - std::exp(y[r * cols + c]) * gsum;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> labels, Reduction reduction) {
  require_rank(logits, 2, "cross_entropy");
  const auto batch = static_cast<std::size_t>(logits.dim(0));
  const auto classes = static_cast<std::size_t>(logits.dim(1));
  if (labels.size() != batch) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(batch));
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0," +
                              std::to_string(classes) + ")");
    }
  }
  auto logp = log_softmax(logits);
  std::vector<T> picked_data(batch);
  for (std::size_t b = 0; b < batch; ++b) picked_data[b] = -logp.data()[b * classes + labels[b]];
  // Route the gather through a tiny custom node so only the label entries receive gradient.
  Tensor<T> picked(Shape{static_cast<std::int64_t>(batch)}, std::move(picked_data));
  if (autograd::wants_grad(logp)) {
    std::vector<int> ys(labels.begin(), labels.end());
    autograd::attach(picked, [logp, picked, ys, classes]() {
      const auto& g = picked.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(logp);
      for (std::size_t b = 0; b < ys.size(); ++b) d[b * classes + ys[b]] -= g[b];
    });
  }
  auto total = sum(picked);
  return reduction == Reduction::kMean ? scale(total, T(1) / static_cast<T>(batch)) : total;
}

template <typename T>
Tensor<T> mse(const Tensor<T>& a, const Tensor<T>& b, Reduction reduction) {
  require_same_shape(a, b, "mse");
  if (a.numel() == 0) throw ShapeError("mse of empty tensors");
  const std::size_t n = a.numel();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    T diff = a.data()[i] - b.data()[i];
    total += diff * diff;
  }
  const T factor = reduction == Reduction::kMean ? T(1) / static_cast<T>(n) : T(1);
  auto out = Tensor<T>::scalar(total * factor);
  bool ga = autograd::wants_grad(a), gb = autograd::wants_grad(b);
  if (ga || gb) {
    autograd::attach(out, [a, b, out, ga, gb, factor, n]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* da = ga ? autograd::grad_buffer(a) : nullptr;
      T* db = gb ? autograd::grad_buffer(b) : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        T v = T(2) * factor * (a.data()[i] - b.data()[i]) * g[0];
        if (da) da[i] += v;
        if (db) db[i] -= v;
      }
    });
  }
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& scores) {
  auto [rows, cols] = rows_cols(scores, "argmax_rows");
  std::vector<int> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = scores.ptr() + r * cols;
    // max_element returns the first maximum: ties go to the lowest index.
    out[r] = static_cast<int>(std::max_element(row, row + cols) - row);
  }
  return out;
}

template <typename T>
Tensor<T> slice_batch(const Tensor<T>& a, std::int64_t begin, std::int64_t end) {
  if (a.rank() < 1 || begin < 0 || end < begin || end > a.dim(0)) {
    throw ShapeError("slice_batch [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") of " + shape_str(a.shape()));
  }
  Shape shape = a.shape();
  const std::size_t inner = a.dim(0) == 0 ? 0 : a.numel() / static_cast<std::size_t>(a.dim(0));
  shape[0] = end - begin;
  auto first = a.data().begin() + static_cast<std::ptrdiff_t>(begin * inner);
  auto last = a.data().begin() + static_cast<std::ptrdiff_t>(end * inner);
  return Tensor<T>(std::move(shape), std::vector<T>(first, last));
}

template <typename T>
Tensor<T> gather_batch(const Tensor<T>& a, std::span<const std::int64_t> rows) {
  if (a.rank() < 1) throw ShapeError("gather_batch: need a batch axis");
  const std::size_t inner = a.dim(0) == 0 ? 0 : a.numel() / static_cast<std::size_t>(a.dim(0));
  Shape shape = a.shape();
  shape[0] = static_cast<std::int64_t>(rows.size());
  std::vector<T> data(rows.size() * inner);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || rows[r] >= a.dim(0)) throw std::out_of_range("gather_batch: row index");
    std::copy_n(a.ptr() + rows[r] * inner, inner, data.data() + r * inner);
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> concat_batch(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_batch: nothing to concatenate");
  Shape shape = parts.front().shape();
  std::int64_t total = 0;
  std::vector<T> data;
  for (const auto& p : parts) {
    Shape tail(p.shape().begin() + 1, p.shape().end());
    if (!std::equal(tail.begin(), tail.end(), shape.begin() + 1, shape.end())) {
      throw ShapeError("concat_batch: trailing shapes differ");
    }
    total += p.dim(0);
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  shape[0] = total;
  return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> clamp_values(const Tensor<T>& a, T lo, T hi) {
  Tensor<T> out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(a.data()[i], lo, hi);
  return out;
}

template <typename T>
double dot_product(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "dot_product");
  double total = 0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    total += static_cast<double>(a.data()[i]) * static_cast<double>(b.data()[i]);
  return total;
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& a) {
  std::vector<To> data(a.data().begin(), a.data().end());
  return Tensor<To>(a.shape(), std::move(data));
}

#define MEMDEF_INSTANTIATE_OPS(T)                                                         \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                          \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                     \
  template Tensor<T> square(const Tensor<T>&);                                            \
  template Tensor<T> sum(const Tensor<T>&);                                               \
  template Tensor<T> mean(const Tensor<T>&);                                              \
  template Tensor<T> sum_per_sample(const Tensor<T>&);                                    \
  template Tensor<T> scale_per_sample(const Tensor<T>&, std::span<const T>);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                    \
  template Tensor<T> flatten(const Tensor<T>&);                                           \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                     \
  template Tensor<T> relu(const Tensor<T>&);                                              \
  template Tensor<T> sigmoid_act(const Tensor<T>&);                                       \
  template Tensor<T> tanh_act(const Tensor<T>&);                                          \
  template Tensor<T> softmax(const Tensor<T>&);                                           \
  template Tensor<T> log_softmax(const Tensor<T>&);                                       \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>, Reduction);    \
  template Tensor<T> mse(const Tensor<T>&, const Tensor<T>&, Reduction);                  \
  template std::vector<int> argmax_rows(const Tensor<T>&);                                \
  template Tensor<T> slice_batch(const Tensor<T>&, std::int64_t, std::int64_t);           \
  template Tensor<T> gather_batch(const Tensor<T>&, std::span<const std::int64_t>);       \
  template Tensor<T> concat_batch(std::span<const Tensor<T>>);                            \
  template Tensor<T> clamp_values(const Tensor<T>&, T, T);                                \
  template double dot_product(const Tensor<T>&, const Tensor<T>&);

MEMDEF_INSTANTIATE_OPS(float)
MEMDEF_INSTANTIATE_OPS(double)

template Tensor<double> cast(const Tensor<float>&);
template Tensor<float> cast(const Tensor<double>&);
template Tensor<float> cast(const Tensor<float>&);
template Tensor<double> cast(const Tensor<double>&);

}  // namespace memdef
