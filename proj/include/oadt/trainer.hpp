// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oadt/dataset.hpp"
#include "oadt/loss.hpp"
#include "oadt/model.hpp"

namespace oadt {

struct TrainConfig {
  std::size_t epochs = 27;
  std::size_t batch_size = 2;
  double base_lr = 1e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Negative: warmup_fraction of the total step count.
  long warmup_steps = -1;
  double warmup_fraction = 0.05;
  // 0 disables clipping.
  double clip_grad_norm = 0.0;
  // 0: epochs * ceil(videos / batch_size). Otherwise a hard cap.
  std::size_t max_steps = 0;
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
  std::size_t total_steps(std::size_t num_videos) const;
  std::size_t resolved_warmup(std::size_t total_steps) const;
};

/// Linear warmup to base_lr over `warmup_steps`, then half-cosine decay
/// reaching 0 at `total_steps`.
double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr,
                 std::size_t warmup_steps);

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// AdamW with decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
/// A parameter without a gradient buffer counts as a zero gradient.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWOptions options) : options_(options) {}

  // Throws kNumeric, leaving every parameter untouched, if any gradient is
  // non-finite.
  void step(const nn::ParameterList<T>& params, double lr);

  std::uint64_t step_count() const { return step_count_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  AdamWOptions options_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_count_ = 0;
};

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
template <typename T>
double clip_gradients(const nn::ParameterList<T>& params, double max_norm);

struct Batch {
  Tensor<float> features;  // [B, T_max, D], zero padded
  nn::PaddingMask mask;
  std::vector<AssignmentResult> assignments;
};

Batch collate(const Dataset& data, std::span<const std::size_t> indices, std::size_t levels);

struct StepMetrics {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double verb_focal = 0.0;
  double noun_focal = 0.0;
  double action_focal = 0.0;
  double iou_loss = 0.0;
  double total = 0.0;
};

// "epoch, step, lr, verb_focal, noun_focal, iou_loss, total"
std::string format_metrics_line(const StepMetrics& m);

struct TrainResult {
  Checkpoint last;
  Checkpoint best;  // lowest epoch-average total loss
  std::vector<StepMetrics> steps;
  std::vector<StepMetrics> epochs;  // per-epoch averages; step is the last one
};

using TrainLogger = std::function<void(const StepMetrics&)>;

/// Deterministic given config.seed: parameter init, shuffling and dropout
/// all derive from it.
TrainResult train(const Dataset& data, const ModelConfig& model_config,
                  const TrainConfig& train_config, const TrainLogger& logger = {});

// Writes last.ckpt, best.ckpt, metrics.log (per step) and epochs.log
// (per-epoch averages) into `dir`.
void write_train_outputs(const TrainResult& result, const std::string& dir);

}  // namespace oadt
