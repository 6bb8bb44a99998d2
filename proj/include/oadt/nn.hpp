// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oadt/ops.hpp"
#include "oadt/tensor.hpp"

namespace oadt::nn {

template <typename T>
struct NamedParameter {
  std::string path;
  Tensor<T> tensor;
};

template <typename T>
using ParameterList = std::vector<NamedParameter<T>>;

/// Valid-timestep flags for a right-padded batch, laid out [batch, length].
class PaddingMask {
 public:
  PaddingMask() = default;
  PaddingMask(std::size_t batch, std::size_t length, std::vector<std::uint8_t> valid);

  static PaddingMask all_valid(std::size_t batch, std::size_t length);
  static PaddingMask from_lengths(std::span<const std::size_t> lengths, std::size_t length);

  std::size_t batch() const { return batch_; }
  std::size_t length() const { return length_; }
  bool valid(std::size_t b, std::size_t t) const { return flags_[b * length_ + t] != 0; }
  std::span<const std::uint8_t> flags() const { return flags_; }
  std::size_t valid_count(std::size_t b) const;

  // A pooled step is valid when any step in its window is valid.
  PaddingMask pooled(std::size_t stride) const;

  // [B, 1, 1, T] additive attention bias: 0 for valid keys, -1e30 otherwise.
  template <typename T>
  Tensor<T> attention_bias() const;

 private:
  std::size_t batch_ = 0;
  std::size_t length_ = 0;
  std::vector<std::uint8_t> flags_;
};

// Optional dropout source threaded through a forward pass; null disables it.
struct DropoutContext {
  double rate = 0.0;
  Rng* rng = nullptr;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  // Weights ~ U(-b, b) with b = sqrt(6/(in+out)), bias zero.
  Linear(std::size_t in, std::size_t out, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const { return ops::linear(x, weight, bias); }
  void collect(ParameterList<T>& params, const std::string& prefix) const;

  std::size_t in_features() const { return weight.extent(1); }
  std::size_t out_features() const { return weight.extent(0); }

  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]
};

template <typename T>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t dim, double eps = 1e-5);

  Tensor<T> operator()(const Tensor<T>& x) const { return ops::layer_norm(x, gamma, beta, eps); }
  void collect(ParameterList<T>& params, const std::string& prefix) const;

  Tensor<T> gamma;
  Tensor<T> beta;
  double eps = 1e-5;
};

/// Scaled dot-product attention over `heads` subspaces of width d_model/heads.
/// Padded keys are excluded; every batch element needs a valid step.
template <typename T>
class MultiHeadSelfAttention {
 public:
  MultiHeadSelfAttention() = default;
  MultiHeadSelfAttention(std::size_t d_model, std::size_t heads, Rng& rng);

  // Wo(Attention(x)) without normalisation or residual.
  Tensor<T> operator()(const Tensor<T>& x, const PaddingMask& mask) const;

  // Softmax weights [B, H, T, T]; rows index queries.
  Tensor<T> attention_weights(const Tensor<T>& x, const PaddingMask& mask) const;

  void collect(ParameterList<T>& params, const std::string& prefix) const;

  std::size_t heads() const { return heads_; }

  Linear<T> query, key, value, output;

 private:
  Tensor<T> split_heads(const Tensor<T>& x) const;
  Tensor<T> weights_from(const Tensor<T>& q, const Tensor<T>& k, const PaddingMask& mask) const;

  std::size_t heads_ = 1;
};

template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t d_model, std::size_t hidden, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const { return fc2(ops::gelu(fc1(x))); }
  void collect(ParameterList<T>& params, const std::string& prefix) const;

  Linear<T> fc1, fc2;
};

/// Pre-norm block: z = x + MHSA(LN1(x)), y = z + MLP(LN2(z)), then optional
/// stride-2 max pooling of y and its mask.
template <typename T>
class TransformerLayer {
 public:
  struct Output {
    Tensor<T> features;  // pooled when downsampling
    Tensor<T> pre_pool;
    PaddingMask mask;    // matches `features`
  };

  TransformerLayer() = default;
  TransformerLayer(std::size_t d_model, std::size_t heads, std::size_t mlp_ratio, bool downsample,
                   Rng& rng);

  // x + Wo(Attention(LN1(x)))
  Tensor<T> attend(const Tensor<T>& x, const PaddingMask& mask,
                   const DropoutContext* dropout = nullptr) const;

  Output forward(const Tensor<T>& x, const PaddingMask& mask,
                 const DropoutContext* dropout = nullptr) const;

  void collect(ParameterList<T>& params, const std::string& prefix) const;

  LayerNorm<T> ln1, ln2;
  MultiHeadSelfAttention<T> mhsa;
  Mlp<T> mlp;
  bool downsample = false;
};

/// Fixed sinusoidal table [length, dim]: even columns sin, odd columns cos,
/// frequencies 10000^(-2i/dim).
template <typename T>
Tensor<T> positional_encoding(std::size_t length, std::size_t dim);

}  // namespace oadt::nn
