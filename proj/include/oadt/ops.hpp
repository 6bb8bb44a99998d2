// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oadt/tensor.hpp"

// Differentiable tensor operations. All are instantiated for float and double.
namespace oadt::ops {

// Binary ops broadcast with numpy rules (trailing extents aligned, 1 stretches).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T value);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& x, T value);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
// Exact (erf) form.
template <typename T> Tensor<T> gelu(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> softplus(const Tensor<T>& x);

/// Batched matrix product a[..., M, K] x b[..., K, P] -> [..., M, P].
/// Batch extents broadcast. Both operands need rank >= 2.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x[..., in] * weight[out, in]^T + bias[out]. `bias` may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> transpose(const Tensor<T>& x, int axis0, int axis1);
// Half-open range [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> sum(const Tensor<T>& x, int axis, bool keepdim = false);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x, int axis, bool keepdim = false);

// Max-subtracted for stability.
template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

/// Normalises over the last axis, then applies gamma/beta of that extent.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     double eps);

/// Max pooling along the temporal axis of x[B, T, D] (or x[T, D]) with
/// kernel == stride and ceil-mode output length. When `valid` (B*T flags)
/// is given, invalid steps never win a window; an all-invalid window
/// yields 0.
template <typename T>
Tensor<T> max_pool1d(const Tensor<T>& x, std::size_t stride,
                     std::span<const std::uint8_t> valid = {});

// Inverted dropout; identity when rate == 0.
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double rate, Rng& rng);

}  // namespace oadt::ops
