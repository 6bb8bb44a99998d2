// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/nn.hpp"

#include <cmath>

namespace oadt::nn {

PaddingMask::PaddingMask(std::size_t batch, std::size_t length, std::vector<std::uint8_t> valid)
    : batch_(batch), length_(length), flags_(std::move(valid)) {
  if (flags_.size() != batch_ * length_) {
    fail(ErrorKind::kShape, "padding mask holds " + std::to_string(flags_.size()) +
                                " flags for batch " + std::to_string(batch_) + " x length " +
                                std::to_string(length_));
  }
}

PaddingMask PaddingMask::all_valid(std::size_t batch, std::size_t length) {
  return PaddingMask(batch, length, std::vector<std::uint8_t>(batch * length, 1));
}

PaddingMask PaddingMask::from_lengths(std::span<const std::size_t> lengths, std::size_t length) {
  std::vector<std::uint8_t> flags(lengths.size() * length, 0);
  for (std::size_t b = 0; b < lengths.size(); ++b) {
    if (lengths[b] > length) {
      fail(ErrorKind::kShape, "sequence length " + std::to_string(lengths[b]) +
                                  " exceeds padded length " + std::to_string(length));
    }
    for (std::size_t t = 0; t < lengths[b]; ++t) flags[b * length + t] = 1;
  }
  return PaddingMask(lengths.size(), length, std::move(flags));
}

std::size_t PaddingMask::valid_count(std::size_t b) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < length_; ++t) n += flags_[b * length_ + t] != 0;
  return n;
}

PaddingMask PaddingMask::pooled(std::size_t stride) const {
  const std::size_t out_len = (length_ + stride - 1) / stride;
  std::vector<std::uint8_t> flags(batch_ * out_len, 0);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t t = 0; t < length_; ++t) {
      if (valid(b, t)) flags[b * out_len + t / stride] = 1;
    }
  }
  return PaddingMask(batch_, out_len, std::move(flags));
}

template <typename T>
Tensor<T> PaddingMask::attention_bias() const {
  std::vector<T> bias(flags_.size());
  for (std::size_t i = 0; i < flags_.size(); ++i) bias[i] = flags_[i] ? T(0) : T(-1e30);
  return Tensor<T>({batch_, 1, 1, length_}, std::move(bias));
}

template Tensor<float> PaddingMask::attention_bias<float>() const;
template Tensor<double> PaddingMask::attention_bias<double>() const;

template <typename T>
Linear<T>::Linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  weight = Tensor<T>::uniform({out, in}, -bound, bound, rng, true);
  bias = Tensor<T>::zeros({out}, true);
}

template <typename T>
void Linear<T>::collect(ParameterList<T>& params, const std::string& prefix) const {
  params.push_back({prefix + ".weight", weight});
  params.push_back({prefix + ".bias", bias});
}

template <typename T>
LayerNorm<T>::LayerNorm(std::size_t dim, double eps_)
    : gamma(Tensor<T>::ones({dim}, true)), beta(Tensor<T>::zeros({dim}, true)), eps(eps_) {}

template <typename T>
void LayerNorm<T>::collect(ParameterList<T>& params, const std::string& prefix) const {
  params.push_back({prefix + ".gamma", gamma});
  params.push_back({prefix + ".beta", beta});
}

template <typename T>
MultiHeadSelfAttention<T>::MultiHeadSelfAttention(std::size_t d_model, std::size_t heads, Rng& rng)
    : query(d_model, d_model, rng),
      key(d_model, d_model, rng),
      value(d_model, d_model, rng),
      output(d_model, d_model, rng),
      heads_(heads) {
  if (heads == 0 || d_model % heads != 0) {
    fail(ErrorKind::kConfig, "d_model " + std::to_string(d_model) +
                                 " is not divisible by heads " + std::to_string(heads));
  }
}

template <typename T>
Tensor<T> MultiHeadSelfAttention<T>::split_heads(const Tensor<T>& x) const {
  const std::size_t b = x.extent(0), t = x.extent(1), d = x.extent(2);
  return ops::transpose(ops::reshape(x, {b, t, heads_, d / heads_}), 1, 2);
}

template <typename T>
Tensor<T> MultiHeadSelfAttention<T>::weights_from(const Tensor<T>& q, const Tensor<T>& k,
                                                  const PaddingMask& mask) const {
  const std::size_t head_dim = q.extent(-1);
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  Tensor<T> scores = ops::mul_scalar(ops::matmul(q, ops::transpose(k, -1, -2)), scale);
  return ops::softmax(ops::add(scores, mask.template attention_bias<T>()), -1);
}

namespace {

template <typename T>
void check_attention_input(const Tensor<T>& x, const PaddingMask& mask) {
  if (x.rank() != 3 || mask.batch() != x.extent(0) || mask.length() != x.extent(1)) {
    fail(ErrorKind::kShape, "attention input " + shape_str(x.shape()) + " does not match mask [" +
                                std::to_string(mask.batch()) + "," +
                                std::to_string(mask.length()) + "]");
  }
  for (std::size_t b = 0; b < mask.batch(); ++b) {
    if (mask.valid_count(b) == 0) {
      fail(ErrorKind::kContract,
           "batch element " + std::to_string(b) + " has no valid timesteps");
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> MultiHeadSelfAttention<T>::attention_weights(const Tensor<T>& x,
                                                       const PaddingMask& mask) const {
  check_attention_input(x, mask);
  return weights_from(split_heads(query(x)), split_heads(key(x)), mask);
}

template <typename T>
Tensor<T> MultiHeadSelfAttention<T>::operator()(const Tensor<T>& x, const PaddingMask& mask) const {
  check_attention_input(x, mask);
  const std::size_t b = x.extent(0), t = x.extent(1), d = x.extent(2);
  Tensor<T> attn = weights_from(split_heads(query(x)), split_heads(key(x)), mask);
  Tensor<T> context = ops::matmul(attn, split_heads(value(x)));
  return output(ops::reshape(ops::transpose(context, 1, 2), {b, t, d}));
}

template <typename T>
void MultiHeadSelfAttention<T>::collect(ParameterList<T>& params, const std::string& prefix) const {
  query.collect(params, prefix + ".query");
  key.collect(params, prefix + ".key");
  value.collect(params, prefix + ".value");
  output.collect(params, prefix + ".output");
}

template <typename T>
Mlp<T>::Mlp(std::size_t d_model, std::size_t hidden, Rng& rng)
    : fc1(d_model, hidden, rng), fc2(hidden, d_model, rng) {}

template <typename T>
void Mlp<T>::collect(ParameterList<T>& params, const std::string& prefix) const {
  fc1.collect(params, prefix + ".fc1");
  fc2.collect(params, prefix + ".fc2");
}

template <typename T>
TransformerLayer<T>::TransformerLayer(std::size_t d_model, std::size_t heads, std::size_t mlp_ratio,
                                      bool downsample_, Rng& rng)
    : ln1(d_model),
      ln2(d_model),
      mhsa(d_model, heads, rng),
      mlp(d_model, d_model * mlp_ratio, rng),
      downsample(downsample_) {}

namespace {

template <typename T>
Tensor<T> maybe_dropout(const Tensor<T>& x, const DropoutContext* dropout) {
  if (dropout == nullptr || dropout->rng == nullptr || dropout->rate <= 0.0) return x;
  return ops::dropout(x, dropout->rate, *dropout->rng);
}

}  // namespace

template <typename T>
Tensor<T> TransformerLayer<T>::attend(const Tensor<T>& x, const PaddingMask& mask,
                                      const DropoutContext* dropout) const {
  return ops::add(x, maybe_dropout(mhsa(ln1(x), mask), dropout));
}

template <typename T>
typename TransformerLayer<T>::Output TransformerLayer<T>::forward(
    const Tensor<T>& x, const PaddingMask& mask, const DropoutContext* dropout) const {
  Tensor<T> z = attend(x, mask, dropout);
  Tensor<T> y = ops::add(z, maybe_dropout(mlp(ln2(z)), dropout));
  if (!downsample) return Output{y, y, mask};
  return Output{ops::max_pool1d(y, 2, mask.flags()), y, mask.pooled(2)};
}

template <typename T>
void TransformerLayer<T>::collect(ParameterList<T>& params, const std::string& prefix) const {
  ln1.collect(params, prefix + ".ln1");
  mhsa.collect(params, prefix + ".mhsa");
  ln2.collect(params, prefix + ".ln2");
  mlp.collect(params, prefix + ".mlp");
}

template <typename T>
Tensor<T> positional_encoding(std::size_t length, std::size_t dim) {
  if (length == 0 || dim == 0) fail(ErrorKind::kContract, "positional encoding needs T, D > 0");
  std::vector<T> table(length * dim);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < dim; ++c) {
      const double pair = static_cast<double>(c / 2 * 2);
      const double freq = std::pow(10000.0, -pair / static_cast<double>(dim));
      const double angle = static_cast<double>(t) * freq;
      table[t * dim + c] = static_cast<T>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor<T>({length, dim}, std::move(table));
}

template class Linear<float>;
template class Linear<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;
template class MultiHeadSelfAttention<float>;
template class MultiHeadSelfAttention<double>;
template class Mlp<float>;
template class Mlp<double>;
template class TransformerLayer<float>;
template class TransformerLayer<double>;
template Tensor<float> positional_encoding<float>(std::size_t, std::size_t);
template Tensor<double> positional_encoding<double>(std::size_t, std::size_t);

}  // namespace oadt::nn
