// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/tensor/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace memdef {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

template <typename T>
Tensor<T>::Tensor() = default;

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<TensorImpl<T>>()) {
  auto n = static_cast<std::size_t>(shape_numel(shape));
  impl_->shape = std::move(shape);
  impl_->data.assign(n, fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : impl_(std::make_shared<TensorImpl<T>>()) {
  if (static_cast<std::size_t>(shape_numel(shape)) != data.size()) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value) {
  return Tensor(Shape{}, std::vector<T>{value});
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> data) {
  Tensor t(std::move(shape), std::move(data));
  t.impl_->requires_grad = true;
  t.impl_->is_param = true;
  return t;
}

template <typename T>
std::int64_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

template <typename T>
T Tensor<T>::item() const {
  if (impl_->data.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(impl_->shape));
  }
  return impl_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
Tensor<T> Tensor<T>::grad() const {
  if (impl_->grad.empty()) return Tensor(impl_->shape, T(0));
  return Tensor(impl_->shape, impl_->grad);
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(impl_->shape, impl_->data);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
GradTape<T>*& active_tape() {
  static thread_local GradTape<T>* tape = nullptr;
  return tape;
}

thread_local bool g_frozen_parameters = false;

}  // namespace

template <typename T>
GradTape<T>::GradTape() : previous_(active_tape<T>()) {
  active_tape<T>() = this;
}

template <typename T>
GradTape<T>::~GradTape() {
  if (active_tape<T>() == this) active_tape<T>() = previous_;
}

template <typename T>
GradTape<T>* GradTape<T>::active() {
  return active_tape<T>();
}

template <typename T>
void GradTape<T>::record(std::function<void()> backward_fn) {
  if (consumed_) throw TapeError("recording onto a consumed tape; call reset() first");
  entries_.push_back(std::move(backward_fn));
}

template <typename T>
void GradTape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw TapeError("backward called twice on the same recording");
  if (!loss.defined() || loss.numel() != 1) {
    throw TapeError("backward root must be a scalar tensor");
  }
  if (!loss.requires_grad()) {
    throw TapeError("backward root was not recorded on the active tape");
  }
  consumed_ = true;
  autograd::grad_buffer(loss)[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

template <typename T>
void GradTape<T>::reset() {
  entries_.clear();
  consumed_ = false;
}

FrozenParameters::FrozenParameters() : previous_(g_frozen_parameters) {
  g_frozen_parameters = true;
}

FrozenParameters::~FrozenParameters() { g_frozen_parameters = previous_; }

bool FrozenParameters::engaged() { return g_frozen_parameters; }

namespace autograd {

template <typename T>
bool wants_grad(const Tensor<T>& t) {
  if (!t.defined() || GradTape<T>::active() == nullptr) return false;
  if (!t.requires_grad()) return false;
  return !(t.is_param() && g_frozen_parameters);
}

template <typename T>
T* grad_buffer(const Tensor<T>& t) {
  auto& impl = *t.impl();
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), T(0));
  return impl.grad.data();
}

template <typename T>
void attach(Tensor<T>& out, std::function<void()> backward_fn) {
  auto* tape = GradTape<T>::active();
  if (tape == nullptr) return;
  out.set_requires_grad(true);
  tape->record(std::move(backward_fn));
}

template <typename T>
void check_finite([[maybe_unused]] const Tensor<T>& t, [[maybe_unused]] const char* op) {
#if !defined(NDEBUG) || defined(MEMDEF_CHECK_FINITE)
  for (auto v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
#endif
}

template bool wants_grad(const Tensor<float>&);
template bool wants_grad(const Tensor<double>&);
template float* grad_buffer(const Tensor<float>&);
template double* grad_buffer(const Tensor<double>&);
template void attach(Tensor<float>&, std::function<void()>);
template void attach(Tensor<double>&, std::function<void()>);
template void check_finite(const Tensor<float>&, const char*);
template void check_finite(const Tensor<double>&, const char*);

}  // namespace autograd

template class Tensor<float>;
template class Tensor<double>;
template class GradTape<float>;
template class GradTape<double>;

}  // namespace memdef
