// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/model.hpp"

#include <cmath>

namespace oadt {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::kConfig, "invalid model config: " + what);
  };
  require(input_dim >= 1, "input_dim must be >= 1");
  require(d_model >= 1, "d_model must be >= 1");
  require(heads >= 1 && d_model % heads == 0, "d_model must be divisible by heads");
  require(pyramid_levels >= 1, "pyramid_levels must be >= 1");
  require(num_verbs >= 1, "num_verbs must be >= 1");
  require(num_nouns >= 1, "num_nouns must be >= 1");
  require(head_layers >= 1, "head_layers must be >= 1");
  require(input_kernel % 2 == 1, "input_kernel must be odd");
  require(max_seq_len >= 1, "max_seq_len must be >= 1");
  require(mlp_ratio >= 1, "mlp_ratio must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
  require(cls_prior_prob >= 0.0 && cls_prior_prob < 1.0, "cls_prior_prob must be in [0, 1)");
  require(offset_scale > 0.0, "offset_scale must be > 0");
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{{"input_dim", input_dim},     {"input_kernel", input_kernel},
                        {"d_model", d_model},
                        {"heads", heads},             {"pyramid_levels", pyramid_levels},
                        {"stem_layers", stem_layers}, {"num_verbs", num_verbs},
                        {"num_nouns", num_nouns},     {"head_layers", head_layers},
                        {"max_seq_len", max_seq_len}, {"mlp_ratio", mlp_ratio},
                        {"dropout", dropout},         {"cls_prior_prob", cls_prior_prob},
                        {"offset_scale", offset_scale}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!doc.contains(key)) fail(ErrorKind::kConfig, std::string("model config lacks ") + key);
    try {
      doc.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::kConfig, std::string("model config field ") + key + " has the wrong type");
    }
  };
  get("input_dim", c.input_dim);
  get("input_kernel", c.input_kernel);
  get("d_model", c.d_model);
  get("heads", c.heads);
  get("pyramid_levels", c.pyramid_levels);
  get("stem_layers", c.stem_layers);
  get("num_verbs", c.num_verbs);
  get("num_nouns", c.num_nouns);
  get("head_layers", c.head_layers);
  get("max_seq_len", c.max_seq_len);
  get("mlp_ratio", c.mlp_ratio);
  get("dropout", c.dropout);
  get("cls_prior_prob", c.cls_prior_prob);
  get("offset_scale", c.offset_scale);
  return c;
}

std::optional<std::string> ModelConfig::first_difference(const ModelConfig& other) const {
  const auto a = to_json(), b = other.to_json();
  for (const auto& [key, value] : a.items()) {
    if (b.at(key) != value) return key;
  }
  return std::nullopt;
}

std::vector<std::size_t> pyramid_lengths(std::size_t length, std::size_t levels) {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < levels; ++l) {
    out.push_back(length);
    length = (length + 1) / 2;
  }
  return out;
}

template <typename T>
PredictionHead<T>::PredictionHead(std::size_t d_model, std::size_t outputs, std::size_t layers,
                                  Rng& rng) {
  for (std::size_t i = 0; i + 1 < layers; ++i) hidden.emplace_back(d_model, d_model, rng);
  output = nn::Linear<T>(d_model, outputs, rng);
}

template <typename T>
Tensor<T> PredictionHead<T>::operator()(const Tensor<T>& x) const {
  Tensor<T> h = x;
  for (const auto& layer : hidden) h = ops::relu(layer(h));
  return output(h);
}

template <typename T>
void PredictionHead<T>::collect(nn::ParameterList<T>& params, const std::string& prefix) const {
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    hidden[i].collect(params, prefix + ".hidden" + std::to_string(i));
  }
  output.collect(params, prefix + ".output");
}

template <typename T>
OadtModel<T>::OadtModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  input_proj = nn::Linear<T>(config_.input_dim * config_.input_kernel, d, rng);
  for (std::size_t i = 0; i < config_.stem_layers; ++i) {
    stem.emplace_back(d, config_.heads, config_.mlp_ratio, false, rng);
  }
  for (std::size_t l = 0; l < config_.pyramid_levels; ++l) {
    // The last stage's pooled output would feed nothing.
    const bool downsample = l + 1 < config_.pyramid_levels;
    stages.emplace_back(d, config_.heads, config_.mlp_ratio, downsample, rng);
    level_norms.emplace_back(d);
  }
  verb_head = PredictionHead<T>(d, config_.num_verbs, config_.head_layers, rng);
  noun_head = PredictionHead<T>(d, config_.num_nouns, config_.head_layers, rng);
  regression_head = PredictionHead<T>(d, 2, config_.head_layers, rng);

  if (config_.cls_prior_prob > 0.0) {
    const T prior = static_cast<T>(-std::log((1.0 - config_.cls_prior_prob) / config_.cls_prior_prob));
    for (auto* head : {&verb_head, &noun_head}) {
      for (T& b : head->output.bias.mutable_data()) b = prior;
    }
  }
}

namespace {

// [B, T, D] -> [B, T, (2r+1)D]: each step concatenated with its r left and r
// right neighbours. Padded steps and positions past either end read as zero.
template <typename T>
Tensor<T> temporal_window(const Tensor<T>& x, const nn::PaddingMask& mask, std::size_t radius) {
  if (radius == 0) return x;
  const std::size_t batch = x.extent(0), length = x.extent(1), dim = x.extent(2);
  std::vector<T> keep(batch * length);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < length; ++t) keep[b * length + t] = mask.valid(b, t) ? T(1) : T(0);
  }
  const Tensor<T> masked = ops::mul(x, Tensor<T>({batch, length, 1}, std::move(keep)));
  std::vector<Tensor<T>> taps;
  for (std::size_t k = 0; k <= 2 * radius; ++k) {
    const long shift = static_cast<long>(k) - static_cast<long>(radius);  // tap reads t + shift
    const std::size_t s = static_cast<std::size_t>(shift < 0 ? -shift : shift);
    if (s == 0) {
      taps.push_back(masked);
    } else if (s >= length) {
      taps.push_back(Tensor<T>::zeros({batch, length, dim}));
    } else if (shift < 0) {
      taps.push_back(ops::concat<T>({Tensor<T>::zeros({batch, s, dim}),
                                     ops::slice(masked, 1, 0, length - s)},
                                    1));
    } else {
      taps.push_back(ops::concat<T>({ops::slice(masked, 1, s, length),
                                     Tensor<T>::zeros({batch, s, dim})},
                                    1));
    }
  }
  return ops::concat(taps, 2);
}

}  // namespace

template <typename T>
PyramidOutputs<T> OadtModel<T>::forward(const Tensor<T>& features, const nn::PaddingMask& mask,
                                        const nn::DropoutContext* dropout) const {
  if (features.rank() != 3 || features.extent(2) != config_.input_dim) {
    fail(ErrorKind::kDimension, "model expects features [B, T, " +
                                    std::to_string(config_.input_dim) + "], got " +
                                    shape_str(features.shape()));
  }
  const std::size_t length = features.extent(1);
  if (length > config_.max_seq_len) {
    fail(ErrorKind::kContract, "sequence length " + std::to_string(length) +
                                   " exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  if (mask.batch() != features.extent(0) || mask.length() != length) {
    fail(ErrorKind::kShape, "mask does not match features " + shape_str(features.shape()));
  }

  Tensor<T> x = ops::add(input_proj(temporal_window(features, mask, config_.input_kernel / 2)),
                         nn::positional_encoding<T>(length, config_.d_model));
  nn::PaddingMask m = mask;
  for (const auto& layer : stem) x = layer.forward(x, m, dropout).features;

  PyramidOutputs<T> out;
  for (std::size_t l = 0; l < stages.size(); ++l) {
    auto stage = stages[l].forward(x, m, dropout);
    PyramidLevel<T> level;
    const Tensor<T> h = level_norms[l](stage.pre_pool);
    level.verb_logits = verb_head(h);
    level.noun_logits = noun_head(h);
    level.offsets = ops::mul_scalar(ops::softplus(regression_head(h)),
                                    static_cast<T>(config_.offset_scale));
    level.stride = std::size_t{1} << l;
    level.mask = m;
    out.levels.push_back(std::move(level));
    x = stage.features;
    m = stage.mask;
  }
  return out;
}

template <typename T>
nn::ParameterList<T> OadtModel<T>::parameters() const {
  nn::ParameterList<T> params;
  input_proj.collect(params, "input_proj");
  for (std::size_t i = 0; i < stem.size(); ++i) stem[i].collect(params, "stem" + std::to_string(i));
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].collect(params, "stage" + std::to_string(i));
    level_norms[i].collect(params, "stage" + std::to_string(i) + ".head_norm");
  }
  verb_head.collect(params, "verb_head");
  noun_head.collect(params, "noun_head");
  regression_head.collect(params, "regression_head");
  return params;
}

template class PredictionHead<float>;
template class PredictionHead<double>;
template class OadtModel<float>;
template class OadtModel<double>;

}  // namespace oadt
