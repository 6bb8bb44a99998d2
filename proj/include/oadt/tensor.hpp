// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "oadt/error.hpp"
#include "oadt/random.hpp"

namespace oadt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Runtime NaN/Inf detection on every op output. Defaults to on in builds
// without NDEBUG.
bool finite_checks_enabled();
void set_finite_checks(bool enabled);

namespace detail {

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
};

}  // namespace detail

/// Dense row-major array with an optional gradient buffer.
///
/// Copies share storage; ops never write into their inputs, so a Tensor is
/// effectively immutable once produced. Parameters are the exception: the
/// optimizer updates them through mutable_data() between tape recordings.
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : impl_(std::make_shared<detail::TensorImpl<T>>()) {
    if (shape_numel(shape) != data.size()) {
      fail(ErrorKind::kShape, "tensor shape " + shape_str(shape) + " holds " +
                                  std::to_string(shape_numel(shape)) + " values, got " +
                                  std::to_string(data.size()));
    }
    for (std::size_t extent : shape) {
      if (extent == 0) fail(ErrorKind::kShape, "zero extent in shape " + shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    std::vector<T> data(shape_numel(shape), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
  }
  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }
  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(1), requires_grad);
  }
  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{}, {value}, requires_grad);
  }
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad = false) {
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
    return Tensor(std::move(shape), std::move(data), requires_grad);
  }
  static Tensor normal(Shape shape, double stddev, Rng& rng, bool requires_grad = false) {
    std::vector<T> data(shape_numel(shape));
    for (auto& v : data) v = static_cast<T>(stddev * rng.normal());
    return Tensor(std::move(shape), std::move(data), requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }

  // Negative axes count from the back.
  std::size_t axis_index(int axis) const {
    const int r = static_cast<int>(rank());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
      fail(ErrorKind::kShape, "axis " + std::to_string(axis) + " out of range for shape " +
                                  shape_str(shape()));
    }
    return static_cast<std::size_t>(a);
  }
  std::size_t extent(int axis) const { return impl_->shape[axis_index(axis)]; }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }
  T operator[](std::size_t i) const { return impl_->data[i]; }

  T item() const {
    if (numel() != 1) fail(ErrorKind::kContract, "item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag) {
    impl_->requires_grad = flag;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }

  // Zero-initialised on first access.
  std::span<T> grad_buffer() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
  }
  void zero_grad() { impl_->grad.clear(); }

  Tensor detach() const { return Tensor(impl_->shape, impl_->data, false); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

/// Ordered record of differentiable operations.
///
/// Ops append an entry when a Tape is active on the current thread and any
/// input requires a gradient. Since entries are appended in execution order
/// the list is already topologically sorted; backward() replays it in
/// reverse and then clears it.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor<T>& output)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const Tensor<T>& output, BackwardFn fn) {
    entries_.push_back(Entry{output, std::move(fn)});
  }

  void backward(Tensor<T> loss) {
    if (!loss.defined() || loss.numel() != 1) {
      fail(ErrorKind::kContract, "backward() requires a scalar loss, got shape " +
                                     (loss.defined() ? shape_str(loss.shape()) : "<undefined>"));
    }
    if (!loss.requires_grad()) {
      entries_.clear();
      return;
    }
    loss.grad_buffer()[0] += T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->output.has_grad()) it->backward(it->output);
    }
    entries_.clear();
  }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    Tensor<T> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

template <typename T>
Tape<T>*& active_tape_slot() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}

template <typename T>
Tape<T>* active_tape() {
  return active_tape_slot<T>();
}

/// Makes a tape the recording target for the current thread.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(active_tape_slot<T>()) {
    active_tape_slot<T>() = &tape;
  }
  ~TapeScope() { active_tape_slot<T>() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Runs backward on the thread's active tape.
template <typename T>
void backward(const Tensor<T>& loss) {
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) fail(ErrorKind::kContract, "backward() called with no active tape");
  tape->backward(loss);
}

namespace detail {

void check_finite(std::span<const float> values, const char* op);
void check_finite(std::span<const double> values, const char* op);

}  // namespace detail

/// Builds an op result and, when recording applies, registers its backward
/// rule. The rule receives the output tensor and reads output.grad().
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<Tensor<T>> inputs,
                      typename Tape<T>::BackwardFn backward) {
  if (finite_checks_enabled()) detail::check_finite(std::span<const T>(data), op);
  Tensor<T> out(std::move(shape), std::move(data));
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) return out;
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (needs_grad) {
    out.set_requires_grad(true);
    tape->record(out, std::move(backward));
  }
  return out;
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& inputs,
                      typename Tape<T>::BackwardFn backward) {
  if (finite_checks_enabled()) detail::check_finite(std::span<const T>(data), op);
  Tensor<T> out(std::move(shape), std::move(data));
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) return out;
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (needs_grad) {
    out.set_requires_grad(true);
    tape->record(out, std::move(backward));
  }
  return out;
}

}  // namespace oadt
