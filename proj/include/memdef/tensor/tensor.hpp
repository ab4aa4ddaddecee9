// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace memdef {

using Shape = std::vector<std::int64_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  bool is_param = false;
};

/// Dense row-major tensor handle. Copies share storage; ops never mutate
/// their inputs, so a tensor's values are fixed once an op has produced it.
/// Parameters and running statistics are the exception and are only written
/// through `mutable_data()` between steps.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor();
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  static Tensor scalar(T value);
  static Tensor parameter(Shape shape, std::vector<T> data);

  const Shape& shape() const { return impl_->shape; }
  std::int64_t dim(std::size_t axis) const;
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }
  bool defined() const { return static_cast<bool>(impl_); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }
  const T* ptr() const { return impl_->data.data(); }
  T item() const;
  T at(std::size_t flat_index) const { return impl_->data.at(flat_index); }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool is_param() const { return impl_->is_param; }

  bool has_grad() const { return !impl_->grad.empty(); }
  /// Accumulated gradient; all zeros when nothing flowed into this tensor.
  Tensor grad() const;
  std::span<const T> grad_data() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  /// Copy of the values with no gradient history.
  Tensor detach() const;

  const std::shared_ptr<TensorImpl<T>>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

/// Define-by-run gradient tape. Constructing a tape makes it the active
/// recorder for its scalar type on the current thread; destruction restores
/// the previously active tape. Entries are replayed in exact reverse order.
template <typename T>
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  void record(std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. A tape may be replayed once.
  void backward(const Tensor<T>& loss);

  /// Drops every recorded entry so the tape can record a fresh graph.
  void reset();

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  static GradTape* active();

 private:
  std::vector<std::function<void()>> entries_;
  GradTape* previous_ = nullptr;
  bool consumed_ = false;
};

/// While alive, parameters are treated as constants by the tape. Used when
/// differentiating with respect to inputs only (attacks).
class FrozenParameters {
 public:
  FrozenParameters();
  ~FrozenParameters();
  FrozenParameters(const FrozenParameters&) = delete;
  FrozenParameters& operator=(const FrozenParameters&) = delete;

  static bool engaged();

 private:
  bool previous_;
};

namespace autograd {

/// True when an op consuming `t` must record a backward entry for it.
template <typename T>
bool wants_grad(const Tensor<T>& t);

/// Gradient buffer of `t`, zero-initialised on first use.
template <typename T>
T* grad_buffer(const Tensor<T>& t);

/// Marks `out` as differentiable and records `backward_fn` on the active tape.
template <typename T>
void attach(Tensor<T>& out, std::function<void()> backward_fn);

/// Throws NumericError when any value is NaN/Inf. Compiled to a no-op in
/// release builds unless MEMDEF_CHECK_FINITE is defined.
template <typename T>
void check_finite(const Tensor<T>& t, const char* op);

}  // namespace autograd

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class GradTape<float>;
extern template class GradTape<double>;

}  // namespace memdef
