// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/memory/attention.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "memdef/tensor/init.hpp"
#include "memdef/tensor/ops.hpp"

namespace memdef {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_matrix(const Tensor<T>& t, const char* what) {
  if (t.rank() != 2) throw ShapeError(std::string(what) + " must be [B,S], got " + shape_str(t.shape()));
}

}  // namespace

template <typename T>
MemoryBank<T>::MemoryBank(std::int64_t slots, std::int64_t dim, int class_count, Rng& rng)
    : class_count_(class_count) {
  if (class_count <= 0) throw std::invalid_argument("memory bank needs at least one class");
  if (slots <= 0 || slots % class_count != 0) {
    throw std::invalid_argument("memory size " + std::to_string(slots) +
                                " is not a positive multiple of the class count " +
                                std::to_string(class_count));
  }
  items_ = kaiming_uniform_init<T>({slots, dim}, dim, rng);
}

template <typename T>
int MemoryBank<T>::slot_class(std::int64_t slot) const {
  if (slot < 0 || slot >= slots()) throw std::out_of_range("slot index out of range");
  return static_cast<int>(slot / slots_per_class());
}

template <typename T>
void MemoryBank<T>::collect(const std::string& prefix, TensorList<T>& out) const {
  if (items_.defined()) out.push_back({prefix + ".items", items_, true});
}

template <typename T>
Tensor<T> cosine_similarity(const Tensor<T>& z, const Tensor<T>& items, T eps,
                            const Tensor<T>& grad_mask) {
  require_matrix(z, "latent");
  require_matrix(items, "memory");
  const auto batch = z.dim(0), dim = z.dim(1), slots = items.dim(0);
  if (items.dim(1) != dim) {
    throw ShapeError("cosine_similarity: latent width " + std::to_string(dim) +
                     " does not match memory width " + std::to_string(items.dim(1)));
  }
  if (grad_mask.defined() && grad_mask.shape() != Shape{batch, slots}) {
    throw ShapeError("cosine_similarity: gradient mask shape " + shape_str(grad_mask.shape()));
  }
  std::vector<T> znorm(batch), mnorm(slots);
  for (std::int64_t b = 0; b < batch; ++b) {
    znorm[b] = CMapMat<T>(z.ptr() + b * dim, 1, dim).norm();
  }
  for (std::int64_t i = 0; i < slots; ++i) {
    mnorm[i] = CMapMat<T>(items.ptr() + i * dim, 1, dim).norm();
  }

  Tensor<T> out(Shape{batch, slots});
  MapMat<T> logits(out.mutable_data().data(), batch, slots);
  logits.noalias() = CMapMat<T>(z.ptr(), batch, dim) * CMapMat<T>(items.ptr(), slots, dim).transpose();
  std::vector<T> denom(static_cast<std::size_t>(batch * slots));
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t i = 0; i < slots; ++i) {
      const T d = znorm[b] * mnorm[i];
      if (!(d > eps) && eps <= T(0)) {
        throw NumericError("cosine_similarity: zero-norm vector with no stabiliser");
      }
      denom[b * slots + i] = std::max(d, eps);
      logits(b, i) /= denom[b * slots + i];
    }
  autograd::check_finite(out, "cosine_similarity");

  const bool gz = autograd::wants_grad(z), gm = autograd::wants_grad(items);
  if (gz || gm) {
    autograd::attach(out, [=, denom = std::move(denom), znorm = std::move(znorm),
                           mnorm = std::move(mnorm)]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      CMapMat<T> c(out.ptr(), batch, slots);
      CMapMat<T> zm(z.ptr(), batch, dim);
      CMapMat<T> mm(items.ptr(), slots, dim);
      // A = G / D; the normalisation term only applies where D was not floored.
      RowMat<T> a(batch, slots), k(batch, slots);
      for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t i = 0; i < slots; ++i) {
          const std::size_t idx = b * slots + i;
          a(b, i) = g[idx] / denom[idx];
          const bool floored = !(znorm[b] * mnorm[i] > eps);
          k(b, i) = floored ? T(0) : g[idx] * c(b, i);
        }
      if (gz) {
        MapMat<T> dz(autograd::grad_buffer(z), batch, dim);
        dz.noalias() += a * mm;
        for (std::int64_t b = 0; b < batch; ++b) {
          if (znorm[b] <= T(0)) continue;
          const T coeff = k.row(b).sum() / (znorm[b] * znorm[b]);
          dz.row(b) -= coeff * zm.row(b);
        }
      }
      if (gm) {
        if (grad_mask.defined()) {
          CMapMat<T> gate(grad_mask.ptr(), batch, slots);
          a = a.cwiseProduct(gate);
          k = k.cwiseProduct(gate);
        }
        MapMat<T> dm(autograd::grad_buffer(items), slots, dim);
        dm.noalias() += a.transpose() * zm;
        for (std::int64_t i = 0; i < slots; ++i) {
          if (mnorm[i] <= T(0)) continue;
          const T coeff = k.col(i).sum() / (mnorm[i] * mnorm[i]);
          if (coeff != T(0)) dm.row(i) -= coeff * mm.row(i);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cosine_logits(const Tensor<T>& z, const MemoryBank<T>& bank, T eps,
                        const Tensor<T>& grad_mask) {
  return cosine_similarity(z, bank.items(), eps, grad_mask);
}

template <typename T>
Tensor<T> address(const Tensor<T>& logits) {
  return softmax(logits);
}

template <typename T>
Tensor<T> hard_shrink_values(const Tensor<T>& w, T phi, T eps) {
  Tensor<T> out(w.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const T v = w.data()[i];
    const T u = v - phi;
    o[i] = u > T(0) ? u * v / (std::abs(u) + eps) : T(0);
  }
  if (autograd::wants_grad(w)) {
    autograd::attach(out, [w, out, phi, eps]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(w);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = w.data()[i];
        const T u = v - phi;
        if (u <= T(0)) continue;
        const T den = u + eps;
        d[i] += g[i] * (v * eps + u * u + u * eps) / (den * den);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> l1_normalize_rows(const Tensor<T>& w, T eps) {
  require_matrix(w, "weights");
  const auto rows = w.dim(0), cols = w.dim(1);
  std::vector<T> norms(rows);
  Tensor<T> out(w.shape());
  auto o = out.mutable_data();
  for (std::int64_t r = 0; r < rows; ++r) {
    T s = 0;
    for (std::int64_t c = 0; c < cols; ++c) s += std::abs(w.data()[r * cols + c]);
    norms[r] = s;
    const T den = std::max(s, eps);
    for (std::int64_t c = 0; c < cols; ++c) o[r * cols + c] = w.data()[r * cols + c] / den;
  }
  if (autograd::wants_grad(w)) {
    autograd::attach(out, [w, out, rows, cols, eps, norms = std::move(norms)]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(w);
      for (std::int64_t r = 0; r < rows; ++r) {
        const T s = norms[r];
        const T den = std::max(s, eps);
        T gw = 0;
        for (std::int64_t c = 0; c < cols; ++c) gw += g[r * cols + c] * w.data()[r * cols + c];
        for (std::int64_t c = 0; c < cols; ++c) {
          const std::size_t idx = r * cols + c;
          T v = g[idx] / den;
          if (s > eps) {
            const T x = w.data()[idx];
            const T sign = x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0));
            v -= sign * gw / (s * s);
          }
          d[idx] += v;
        }
      }
    });
  }
  return out;
}

template <typename T>
ShrinkResult<T> hard_shrink(const Tensor<T>& w_bar, const ShrinkConfig& cfg) {
  require_matrix(w_bar, "addressing weights");
  for (auto v : w_bar.data()) {
    if (v < T(0)) throw std::invalid_argument("hard_shrink expects non-negative weights");
  }
  const T eps = static_cast<T>(cfg.epsilon_num);
  auto shrunk = hard_shrink_values(w_bar, static_cast<T>(cfg.phi), eps);
  ShrinkResult<T> result{l1_normalize_rows(shrunk, eps), {}};
  const auto cols = w_bar.dim(1);
  for (std::int64_t r = 0; r < w_bar.dim(0); ++r) {
    const T* row = result.weights.ptr() + r * cols;
    if (std::all_of(row, row + cols, [](T v) { return v == T(0); })) result.empty_rows.push_back(r);
  }
  return result;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> one_hot_mask(int class_id, const MemoryBank<T>& bank) {
  if (class_id < 0 || class_id >= bank.class_count()) {
    throw std::out_of_range("class id " + std::to_string(class_id) + " outside [0," +
                            std::to_string(bank.class_count()) + ")");
  }
  const auto slots = bank.slots(), per = bank.slots_per_class();
  Tensor<T> mask(Shape{slots}, T(0)), unmask(Shape{slots}, T(1));
  for (std::int64_t i = class_id * per; i < (class_id + 1) * per; ++i) {
    mask.mutable_data()[i] = T(1);
    unmask.mutable_data()[i] = T(0);
  }
  return {mask, unmask};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> class_masks(std::span<const int> classes, const MemoryBank<T>& bank) {
  const auto batch = static_cast<std::int64_t>(classes.size());
  const auto slots = bank.slots();
  Tensor<T> mask(Shape{batch, slots}), unmask(Shape{batch, slots});
  for (std::int64_t b = 0; b < batch; ++b) {
    auto [m, u] = one_hot_mask(classes[b], bank);
    std::copy(m.data().begin(), m.data().end(), mask.mutable_data().begin() + b * slots);
    std::copy(u.data().begin(), u.data().end(), unmask.mutable_data().begin() + b * slots);
  }
  return {mask, unmask};
}

template <typename T>
AttentionWeights<T> split_weights(const Tensor<T>& w_bar, const Tensor<T>& mask,
                                  const Tensor<T>& unmask) {
  if (mask.shape() != w_bar.shape() || unmask.shape() != w_bar.shape()) {
    throw ShapeError("split_weights: mask shape " + shape_str(mask.shape()) +
                     " does not match weights " + shape_str(w_bar.shape()));
  }
  return {w_bar, mul(w_bar, mask), mul(w_bar, unmask), mask, unmask};
}

template <typename T>
Tensor<T> latent_recombine(const Tensor<T>& weights, const MemoryBank<T>& bank) {
  return matmul(weights, bank.items());
}

template <typename T>
Tensor<T> attention_entropy(const Tensor<T>& weights, T eps) {
  T total = 0;
  for (auto v : weights.data()) {
    if (v < T(0)) throw std::invalid_argument("attention_entropy: negative weight");
    if (v > eps) total -= v * std::log(v);
  }
  auto out = Tensor<T>::scalar(total);
  if (autograd::wants_grad(weights)) {
    autograd::attach(out, [weights, out, eps]() {
      const auto& g = out.impl()->grad;
      if (g.empty()) return;
      T* d = autograd::grad_buffer(weights);
      for (std::size_t i = 0; i < weights.numel(); ++i) {
        const T v = weights.data()[i];
        if (v > eps) d[i] += g[0] * (-std::log(v) - T(1));
      }
    });
  }
  return out;
}

template <typename T>
std::vector<std::int64_t> row_support(const Tensor<T>& weights) {
  require_matrix(weights, "weights");
  const auto cols = weights.dim(1);
  std::vector<std::int64_t> out(weights.dim(0));
  for (std::int64_t r = 0; r < weights.dim(0); ++r) {
    const T* row = weights.ptr() + r * cols;
    out[r] = std::count_if(row, row + cols, [](T v) { return v > T(0); });
  }
  return out;
}

#define MEMDEF_INSTANTIATE_ATTENTION(T)                                                       \
  template class MemoryBank<T>;                                                              \
  template Tensor<T> cosine_similarity(const Tensor<T>&, const Tensor<T>&, T,                \
                                       const Tensor<T>&);                                    \
  template Tensor<T> cosine_logits(const Tensor<T>&, const MemoryBank<T>&, T,                \
                                   const Tensor<T>&);                                        \
  template Tensor<T> address(const Tensor<T>&);                                              \
  template Tensor<T> hard_shrink_values(const Tensor<T>&, T, T);                             \
  template Tensor<T> l1_normalize_rows(const Tensor<T>&, T);                                 \
  template ShrinkResult<T> hard_shrink(const Tensor<T>&, const ShrinkConfig&);               \
  template std::pair<Tensor<T>, Tensor<T>> one_hot_mask(int, const MemoryBank<T>&);          \
  template std::pair<Tensor<T>, Tensor<T>> class_masks(std::span<const int>,                 \
                                                       const MemoryBank<T>&);                \
  template AttentionWeights<T> split_weights(const Tensor<T>&, const Tensor<T>&,             \
                                             const Tensor<T>&);                              \
  template Tensor<T> latent_recombine(const Tensor<T>&, const MemoryBank<T>&);               \
  template Tensor<T> attention_entropy(const Tensor<T>&, T);                                 \
  template std::vector<std::int64_t> row_support(const Tensor<T>&);

MEMDEF_INSTANTIATE_ATTENTION(float)
MEMDEF_INSTANTIATE_ATTENTION(double)

}  // namespace memdef
