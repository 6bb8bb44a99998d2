// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oadt/nn.hpp"

namespace oadt {

struct ModelConfig {
  std::size_t input_dim = 0;
  // Temporal window of the input projection (odd). 1 projects each step
  // alone; 9 spans both ends of every segment the finest level regresses.
  std::size_t input_kernel = 9;
  std::size_t d_model = 256;
  std::size_t heads = 4;
  std::size_t pyramid_levels = 4;
  std::size_t stem_layers = 1;
  std::size_t num_verbs = 1;
  std::size_t num_nouns = 1;
  // Full-connection layers per head, counting the output layer.
  std::size_t head_layers = 2;
  std::size_t max_seq_len = 2304;
  std::size_t mlp_ratio = 4;
  double dropout = 0.1;
  // Initial sigmoid output of the classification heads; 0 leaves biases at 0.
  double cls_prior_prob = 0.01;
  // Offsets are offset_scale * softplus(head output), in level units.
  double offset_scale = 1.0;

  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);

  // Name of the first field that differs, if any.
  std::optional<std::string> first_difference(const ModelConfig& other) const;

  bool operator==(const ModelConfig&) const = default;
};

// Temporal extents per level: T, ceil(T/2), ceil(T/4), ...
std::vector<std::size_t> pyramid_lengths(std::size_t length, std::size_t levels);

template <typename T>
struct PyramidLevel {
  Tensor<T> verb_logits;  // [B, T_l, V]
  Tensor<T> noun_logits;  // [B, T_l, C]
  Tensor<T> offsets;      // [B, T_l, 2], (d_start, d_end) >= 0 in level units
  std::size_t stride = 1; // 2^level in base features
  nn::PaddingMask mask;
};

template <typename T>
struct PyramidOutputs {
  std::vector<PyramidLevel<T>> levels;

  std::size_t batch() const { return levels.front().verb_logits.extent(0); }
  // N: candidate count per (padded) video.
  std::size_t total_locations() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += l.verb_logits.extent(1);
    return n;
  }
};

/// Stack of full-connection layers with ReLU in between.
template <typename T>
class PredictionHead {
 public:
  PredictionHead() = default;
  PredictionHead(std::size_t d_model, std::size_t outputs, std::size_t layers, Rng& rng);

  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(nn::ParameterList<T>& params, const std::string& prefix) const;

  std::vector<nn::Linear<T>> hidden;
  nn::Linear<T> output;
};

/// Input projection, transformer neck with a temporal feature pyramid, and
/// heads shared across levels. Stage l's pre-pool output feeds level l.
template <typename T>
class OadtModel {
 public:
  OadtModel(const ModelConfig& config, std::uint64_t seed);

  PyramidOutputs<T> forward(const Tensor<T>& features, const nn::PaddingMask& mask,
                            const nn::DropoutContext* dropout = nullptr) const;

  // Stable order; paths are the checkpoint keys.
  nn::ParameterList<T> parameters() const;

  const ModelConfig& config() const { return config_; }

  nn::Linear<T> input_proj;
  std::vector<nn::TransformerLayer<T>> stem;
  std::vector<nn::TransformerLayer<T>> stages;
  std::vector<nn::LayerNorm<T>> level_norms;  // one per level, ahead of the heads
  PredictionHead<T> verb_head;
  PredictionHead<T> noun_head;
  PredictionHead<T> regression_head;

 private:
  ModelConfig config_;
};

struct CheckpointRecord {
  std::string path;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<CheckpointRecord> parameters;
  std::uint64_t step = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

Checkpoint make_checkpoint(const OadtModel<float>& model, std::uint64_t step, std::uint64_t seed);
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
// Also rejects a stored config that differs from `expected`, naming the field.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

// Copies stored values into a model built from the same config.
void restore_parameters(OadtModel<float>& model, const Checkpoint& ckpt);
OadtModel<float> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace oadt
