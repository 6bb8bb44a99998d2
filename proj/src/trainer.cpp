// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "oadt/binary_io.hpp"

namespace oadt {

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::kConfig, "invalid train config: " + what);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(base_lr > 0.0, "base_lr must be > 0");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must be in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(warmup_fraction >= 0.0 && warmup_fraction < 1.0, "warmup_fraction must be in [0, 1)");
  require(clip_grad_norm >= 0.0, "clip_grad_norm must be >= 0");
  require(loss.lambda_reg >= 0.0 && loss.lambda_action >= 0.0, "loss weights must be >= 0");
  require(loss.focal.alpha > 0.0 && loss.focal.alpha <= 1.0, "focal_alpha must be in (0, 1]");
  require(loss.focal.gamma >= 0.0, "focal_gamma must be >= 0");
}

std::size_t TrainConfig::total_steps(std::size_t num_videos) const {
  const std::size_t per_epoch = (num_videos + batch_size - 1) / batch_size;
  const std::size_t total = epochs * per_epoch;
  return max_steps > 0 ? std::min(total, max_steps) : total;
}

std::size_t TrainConfig::resolved_warmup(std::size_t total) const {
  if (warmup_steps >= 0) return std::min(static_cast<std::size_t>(warmup_steps), total);
  return static_cast<std::size_t>(std::floor(warmup_fraction * static_cast<double>(total)));
}

double cosine_lr(std::size_t step, std::size_t total_steps, double base_lr,
                 std::size_t warmup_steps) {
  if (step > total_steps) {
    fail(ErrorKind::kContract, "lr step " + std::to_string(step) + " beyond total " +
                                   std::to_string(total_steps));
  }
  if (step < warmup_steps) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  if (total_steps == warmup_steps) return base_lr;
  const double progress = static_cast<double>(step - warmup_steps) /
                          static_cast<double>(total_steps - warmup_steps);
  return 0.5 * base_lr * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
void AdamW<T>::step(const nn::ParameterList<T>& params, double lr) {
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        fail(ErrorKind::kNumeric, "non-finite gradient in " + p.path + "; step skipped");
      }
    }
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    fail(ErrorKind::kContract, "optimizer state tracks " + std::to_string(m_.size()) +
                                   " parameters, got " + std::to_string(params.size()));
  }
  ++step_count_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T> tensor = params[pi].tensor;
    const auto grad = tensor.grad();
    auto theta = tensor.mutable_data();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      const double t = static_cast<double>(theta[i]);
      theta[i] = static_cast<T>(t - lr * (m_hat / (std::sqrt(v_hat) + options_.eps) +
                                          options_.weight_decay * t));
    }
  }
}

template <typename T>
double clip_gradients(const nn::ParameterList<T>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (const auto& p : params) {
      Tensor<T> t = p.tensor;
      if (!t.has_grad()) continue;
      for (T& g : t.grad_buffer()) g *= scale;
    }
  }
  return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_gradients(const nn::ParameterList<float>&, double);
template double clip_gradients(const nn::ParameterList<double>&, double);

Batch collate(const Dataset& data, std::span<const std::size_t> indices, std::size_t levels) {
  std::size_t max_len = 0;
  std::vector<std::size_t> lengths;
  for (std::size_t i : indices) {
    lengths.push_back(data.videos[i].features.length);
    max_len = std::max(max_len, lengths.back());
  }
  const std::size_t dim = data.feature_dim;
  std::vector<float> values(indices.size() * max_len * dim, 0.0f);
  Batch batch;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Video& video = data.videos[indices[b]];
    std::copy(video.features.values.begin(), video.features.values.end(),
              values.begin() + static_cast<std::ptrdiff_t>(b * max_len * dim));
    batch.assignments.push_back(assign(video.annotation.segments,
                                       PyramidGeometry::make(max_len, lengths[b], levels),
                                       video.features.calib));
  }
  batch.features = Tensor<float>({indices.size(), max_len, dim}, std::move(values));
  batch.mask = nn::PaddingMask::from_lengths(lengths, max_len);
  return batch;
}

std::string format_metrics_line(const StepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu, %zu, %.6e, %.6f, %.6f, %.6f, %.6f", m.epoch, m.step, m.lr,
                m.verb_focal, m.noun_focal, m.iou_loss, m.total);
  return buf;
}

namespace {

void check_compatible(const Dataset& data, const ModelConfig& config) {
  if (data.videos.empty()) fail(ErrorKind::kEmpty, "training dataset is empty");
  if (config.input_dim != data.feature_dim) {
    fail(ErrorKind::kDimension, "model input_dim " + std::to_string(config.input_dim) +
                                    " but dataset feature dim is " +
                                    std::to_string(data.feature_dim));
  }
  for (const auto& v : data.videos) {
    if (v.features.length > config.max_seq_len) {
      fail(ErrorKind::kDimension, "video " + v.annotation.video_id + " has T=" +
                                      std::to_string(v.features.length) + " > max_seq_len " +
                                      std::to_string(config.max_seq_len));
    }
    for (const auto& g : v.annotation.segments) {
      if (g.verb >= config.num_verbs || g.noun >= config.num_nouns) {
        fail(ErrorKind::kDimension, "video " + v.annotation.video_id +
                                        " uses a class id outside num_verbs/num_nouns");
      }
    }
  }
}

}  // namespace

TrainResult train(const Dataset& data, const ModelConfig& model_config,
                  const TrainConfig& train_config, const TrainLogger& logger) {
  train_config.validate();
  check_compatible(data, model_config);
  OadtModel<float> model(model_config, train_config.seed);
  const auto params = model.parameters();
  AdamW<float> optimizer({train_config.beta1, train_config.beta2, train_config.adam_eps,
                          train_config.weight_decay});

  const std::size_t total = train_config.total_steps(data.videos.size());
  const std::size_t warmup = train_config.resolved_warmup(total);
  Rng shuffle_rng(train_config.seed ^ 0x9E3779B97F4A7C15ULL);
  Rng dropout_rng(train_config.seed ^ 0xD1B54A32D192ED03ULL);
  const nn::DropoutContext dropout{model_config.dropout, &dropout_rng};

  TrainResult result;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  std::vector<std::size_t> order(data.videos.size());
  for (std::size_t epoch = 0; epoch < train_config.epochs && step < total; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    StepMetrics avg;
    std::size_t steps_this_epoch = 0;
    for (std::size_t begin = 0; begin < order.size() && step < total;
         begin += train_config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + train_config.batch_size);
      const Batch batch = collate(data, std::span(order).subspan(begin, end - begin),
                                  model_config.pyramid_levels);
      for (const auto& p : params) Tensor<float>(p.tensor).zero_grad();

      Tape<float> tape;
      LossBreakdown<float> loss;
      {
        TapeScope<float> scope(tape);
        const auto outputs = model.forward(batch.features, batch.mask, &dropout);
        loss = total_loss(outputs, batch.assignments, train_config.loss);
        tape.backward(loss.total);
      }
      if (train_config.clip_grad_norm > 0.0) clip_gradients(params, train_config.clip_grad_norm);
      const double lr = cosine_lr(step + 1, total, train_config.base_lr, warmup);
      optimizer.step(params, lr);

      StepMetrics m{epoch,           step,           lr,
                    loss.verb_focal, loss.noun_focal, loss.action_focal,
                    loss.iou_loss,   loss.total_value};
      if (logger) logger(m);
      result.steps.push_back(m);
      avg.verb_focal += m.verb_focal;
      avg.noun_focal += m.noun_focal;
      avg.action_focal += m.action_focal;
      avg.iou_loss += m.iou_loss;
      avg.total += m.total;
      ++steps_this_epoch;
      ++step;
      avg.epoch = epoch;
      avg.step = m.step;
      avg.lr = lr;
    }
    const double n = static_cast<double>(steps_this_epoch);
    avg.verb_focal /= n;
    avg.noun_focal /= n;
    avg.action_focal /= n;
    avg.iou_loss /= n;
    avg.total /= n;
    result.epochs.push_back(avg);
    if (avg.total < best_loss) {
      best_loss = avg.total;
      result.best = make_checkpoint(model, step, train_config.seed);
    }
  }
  result.last = make_checkpoint(model, step, train_config.seed);
  return result;
}

void write_train_outputs(const TrainResult& result, const std::string& dir) {
  const auto root = std::filesystem::path(dir);
  save_checkpoint((root / "last.ckpt").string(), result.last);
  save_checkpoint((root / "best.ckpt").string(), result.best);
  std::string log;
  for (const auto& m : result.steps) log += format_metrics_line(m) + "\n";
  binary::write_text((root / "metrics.log").string(), log);
  std::string epochs;
  for (const auto& m : result.epochs) epochs += format_metrics_line(m) + "\n";
  binary::write_text((root / "epochs.log").string(), epochs);
}

}  // namespace oadt
