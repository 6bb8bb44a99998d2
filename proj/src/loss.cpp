// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/loss.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace oadt {

double iou1d(double a_start, double a_end, double b_start, double b_end) {
  if (!(a_start < a_end) || !(b_start < b_end)) {
    fail(ErrorKind::kContract, "iou1d needs start < end for both segments");
  }
  const double inter = std::max(0.0, std::min(a_end, b_end) - std::max(a_start, b_start));
  const double uni = std::max(a_end, b_end) - std::min(a_start, b_start);
  return inter / uni;
}

PyramidGeometry PyramidGeometry::make(std::size_t padded_length, std::size_t valid_length,
                                      std::size_t levels) {
  return PyramidGeometry{pyramid_lengths(padded_length, levels),
                         pyramid_lengths(valid_length, levels)};
}

std::size_t PyramidGeometry::total_locations() const {
  std::size_t n = 0;
  for (std::size_t l : lengths) n += l;
  return n;
}

LevelRange regression_range(std::size_t level, std::size_t levels) {
  LevelRange r;
  const double scale = std::ldexp(1.0, static_cast<int>(level));
  r.lower = level == 0 ? 0.0 : 4.0 * scale;
  r.upper = level + 1 == levels ? std::numeric_limits<double>::infinity() : 8.0 * scale;
  return r;
}

std::size_t AssignmentResult::positive_count() const {
  std::size_t n = 0;
  for (const auto& loc : locations) n += loc.positive;
  return n;
}

namespace {
// Pyramid cell times can sit exactly on a segment end; rounding must not
// decide whether such a cell is inside.
constexpr double kTimeSlack = 1e-9;
}  // namespace

AssignmentResult assign(std::span<const GroundTruthSegment> segments,
                        const PyramidGeometry& geometry, const TimeCalibration& calib) {
  const double unit = calib.step_sec();
  auto order_key = [&](std::size_t s) {
    const auto& g = segments[s];
    return std::make_tuple(g.length(), g.start_sec, g.end_sec, g.verb, g.noun);
  };

  AssignmentResult result;
  result.locations.reserve(geometry.total_locations());
  for (std::size_t l = 0; l < geometry.levels(); ++l) {
    const LevelRange range = regression_range(l, geometry.levels());
    const double level_unit = unit * std::ldexp(1.0, static_cast<int>(l));
    for (std::size_t i = 0; i < geometry.lengths[l]; ++i) {
      LocationTarget loc;
      loc.level = l;
      loc.index = i;
      loc.time_sec = candidate_time(l, i, geometry.lengths[l], calib);
      loc.valid = i < geometry.valid_lengths[l];
      if (loc.valid) {
        for (std::size_t s = 0; s < segments.size(); ++s) {
          const auto& g = segments[s];
          // Lengths built from whole steps land a few ulps off integers.
          const double length_units = g.length() / unit + 1e-9;
          if (loc.time_sec < g.start_sec - kTimeSlack || loc.time_sec > g.end_sec + kTimeSlack) {
            continue;
          }
          if (length_units < range.lower || length_units >= range.upper) continue;
          if (loc.segment < 0 || order_key(s) < order_key(static_cast<std::size_t>(loc.segment))) {
            loc.segment = static_cast<int>(s);
          }
        }
      }
      if (loc.segment >= 0) {
        const auto& g = segments[static_cast<std::size_t>(loc.segment)];
        loc.positive = true;
        loc.verb = g.verb;
        loc.noun = g.noun;
        loc.d_start = std::max(0.0, loc.time_sec - g.start_sec) / level_unit;
        loc.d_end = std::max(0.0, g.end_sec - loc.time_sec) / level_unit;
      }
      result.locations.push_back(loc);
    }
  }
  return result;
}

namespace {

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
std::span<T> grad_of(Tensor<T> t) {
  return t.grad_buffer();
}

template <typename T>
void check_finite_inputs(const Tensor<T>& logits, const char* op) {
  for (T v : logits.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, std::string(op) + ": non-finite logit");
  }
}

template <typename T>
double weight_of(std::span<const T> row_weight, std::size_t r) {
  return row_weight.empty() ? 1.0 : static_cast<double>(row_weight[r]);
}

template <typename T>
double positive_normalizer(std::span<const T> targets, std::span<const T> row_weight,
                           std::size_t rows, std::size_t width) {
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (weight_of(row_weight, r) <= 0.0) continue;
    bool any = false;
    for (std::size_t c = 0; c < width && !any; ++c) any = targets[r * width + c] > T(0);
    count += any;
  }
  return static_cast<double>(std::max<std::size_t>(count, 1));
}

// Loss and d(loss)/d(logit) for one sigmoid element with target y in [0, 1].
struct FocalTerm {
  double loss;
  double dlogit;
};

FocalTerm focal_term(double x, double y, const FocalOptions& o) {
  const double p = sigmoid(x), q = sigmoid(-x);
  const double log_p = log_sigmoid(x), log_q = log_sigmoid(-x);
  const double a = o.alpha, g = o.gamma;
  const double pos = -a * std::pow(q, g) * log_p;
  const double neg = -(1.0 - a) * std::pow(p, g) * log_q;
  const double dpos = a * (g * std::pow(q, g) * p * log_p - std::pow(q, g + 1.0));
  const double dneg = (1.0 - a) * (std::pow(p, g + 1.0) - g * std::pow(p, g) * q * log_q);
  return {y * pos + (1.0 - y) * neg, y * dpos + (1.0 - y) * dneg};
}

// Focal loss and d/dp for a probability given as log p (for stability).
struct ProbTerm {
  double loss;
  double dprob;
};

ProbTerm focal_prob_term(double log_p, double y, const FocalOptions& o) {
  const double p = std::exp(log_p);
  const double q = std::max(-std::expm1(log_p), 1e-300);
  const double log_q = std::log(q);
  const double a = o.alpha, g = o.gamma;
  const double pos = -a * std::pow(q, g) * log_p;
  const double neg = -(1.0 - a) * std::pow(p, g) * log_q;
  double dpos = -a * std::pow(q, g) / p;
  double dneg = (1.0 - a) * std::pow(p, g) / q;
  if (g != 0.0) {
    dpos += a * g * std::pow(q, g - 1.0) * log_p;
    dneg -= (1.0 - a) * g * std::pow(p, g - 1.0) * log_q;
  }
  return {y * pos + (1.0 - y) * neg, y * dpos + (1.0 - y) * dneg};
}

void check_focal_options(const FocalOptions& o) {
  if (!(o.alpha > 0.0 && o.alpha <= 1.0) || !(o.gamma >= 0.0)) {
    fail(ErrorKind::kContract, "focal loss needs alpha in (0, 1] and gamma >= 0");
  }
}

}  // namespace

template <typename T>
Tensor<T> focal_loss(const Tensor<T>& logits, std::span<const T> targets,
                     const FocalOptions& options, std::span<const T> row_weight) {
  check_focal_options(options);
  check_finite_inputs(logits, "focal_loss");
  const std::size_t width = logits.extent(-1);
  const std::size_t rows = logits.numel() / width;
  if (targets.size() != logits.numel() || (!row_weight.empty() && row_weight.size() != rows)) {
    fail(ErrorKind::kShape, "focal_loss targets/weights do not match logits " +
                                shape_str(logits.shape()));
  }
  const double norm = positive_normalizer(targets, row_weight, rows, width);
  auto grads = std::make_shared<std::vector<T>>(logits.numel(), T(0));
  const auto x = logits.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double w = weight_of(row_weight, r);
    if (w == 0.0) continue;
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t at = r * width + c;
      const FocalTerm t = focal_term(static_cast<double>(x[at]), static_cast<double>(targets[at]), options);
      total += w * t.loss;
      (*grads)[at] = static_cast<T>(w * t.dlogit / norm);
    }
  }
  return make_result<T>("focal_loss", Shape{}, {static_cast<T>(total / norm)}, {logits},
                        [logits, grads](const Tensor<T>& o) {
                          const T g = o.grad()[0];
                          auto gx = grad_of(logits);
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (*grads)[i];
                        });
}

template <typename T>
Tensor<T> action_focal_loss(const Tensor<T>& verb_logits, const Tensor<T>& noun_logits,
                            std::span<const T> targets, const FocalOptions& options,
                            std::span<const T> row_weight) {
  check_focal_options(options);
  check_finite_inputs(verb_logits, "action_focal_loss");
  check_finite_inputs(noun_logits, "action_focal_loss");
  const std::size_t nv = verb_logits.extent(-1), nn_ = noun_logits.extent(-1);
  const std::size_t rows = verb_logits.numel() / nv;
  if (noun_logits.numel() / nn_ != rows || targets.size() != rows * nv * nn_ ||
      (!row_weight.empty() && row_weight.size() != rows)) {
    fail(ErrorKind::kShape, "action_focal_loss inputs disagree: verbs " +
                                shape_str(verb_logits.shape()) + ", nouns " +
                                shape_str(noun_logits.shape()));
  }
  const double norm = positive_normalizer(targets, row_weight, rows, nv * nn_);
  auto gv = std::make_shared<std::vector<T>>(verb_logits.numel(), T(0));
  auto gn = std::make_shared<std::vector<T>>(noun_logits.numel(), T(0));
  const auto vd = verb_logits.data();
  const auto nd = noun_logits.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double w = weight_of(row_weight, r);
    if (w == 0.0) continue;
    for (std::size_t v = 0; v < nv; ++v) {
      const double xv = static_cast<double>(vd[r * nv + v]);
      for (std::size_t n = 0; n < nn_; ++n) {
        const double xn = static_cast<double>(nd[r * nn_ + n]);
        const double log_p = log_sigmoid(xv) + log_sigmoid(xn);
        const double y = static_cast<double>(targets[(r * nv + v) * nn_ + n]);
        const ProbTerm t = focal_prob_term(log_p, y, options);
        total += w * t.loss;
        const double p = std::exp(log_p);
        const double scale = w * t.dprob * p / norm;
        (*gv)[r * nv + v] += static_cast<T>(scale * sigmoid(-xv));
        (*gn)[r * nn_ + n] += static_cast<T>(scale * sigmoid(-xn));
      }
    }
  }
  return make_result<T>("action_focal_loss", Shape{}, {static_cast<T>(total / norm)},
                        {verb_logits, noun_logits},
                        [verb_logits, noun_logits, gv, gn](const Tensor<T>& o) {
                          const T g = o.grad()[0];
                          if (verb_logits.requires_grad()) {
                            auto gx = grad_of(verb_logits);
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (*gv)[i];
                          }
                          if (noun_logits.requires_grad()) {
                            auto gx = grad_of(noun_logits);
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (*gn)[i];
                          }
                        });
}

template <typename T>
Tensor<T> iou_loss(const Tensor<T>& pred_offsets, std::span<const T> target_offsets,
                   std::span<const std::uint8_t> positive) {
  if (pred_offsets.extent(-1) != 2 || target_offsets.size() != pred_offsets.numel() ||
      positive.size() != pred_offsets.numel() / 2) {
    fail(ErrorKind::kShape, "iou_loss inputs do not match offsets " +
                                shape_str(pred_offsets.shape()));
  }
  const std::size_t rows = positive.size();
  std::size_t count = 0;
  for (auto p : positive) count += p != 0;
  const double norm = static_cast<double>(std::max<std::size_t>(count, 1));
  auto grads = std::make_shared<std::vector<T>>(pred_offsets.numel(), T(0));
  const auto pd = pred_offsets.data();
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!positive[r]) continue;
    const double ps = pd[2 * r], pe = pd[2 * r + 1];
    const double ts = target_offsets[2 * r], te = target_offsets[2 * r + 1];
    const double inter = std::min(ps, ts) + std::min(pe, te);
    const double uni = std::max(ps, ts) + std::max(pe, te);
    if (!(uni > 0.0)) continue;
    const double iou = inter / uni;
    total += 1.0 - iou;
    // d(1 - I/U) = -(dI * U - I * dU) / U^2
    const double di_s = ps <= ts ? 1.0 : 0.0, du_s = ps > ts ? 1.0 : 0.0;
    const double di_e = pe <= te ? 1.0 : 0.0, du_e = pe > te ? 1.0 : 0.0;
    (*grads)[2 * r] = static_cast<T>(-(di_s * uni - inter * du_s) / (uni * uni) / norm);
    (*grads)[2 * r + 1] = static_cast<T>(-(di_e * uni - inter * du_e) / (uni * uni) / norm);
  }
  return make_result<T>("iou_loss", Shape{}, {static_cast<T>(total / norm)}, {pred_offsets},
                        [pred_offsets, grads](const Tensor<T>& o) {
                          const T g = o.grad()[0];
                          auto gx = grad_of(pred_offsets);
                          for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * (*grads)[i];
                        });
}

template <typename T>
LossBreakdown<T> total_loss(const PyramidOutputs<T>& outputs,
                            std::span<const AssignmentResult> assignments,
                            const LossConfig& config) {
  std::vector<Tensor<T>> verbs, nouns, offsets;
  for (const auto& level : outputs.levels) {
    verbs.push_back(level.verb_logits);
    nouns.push_back(level.noun_logits);
    offsets.push_back(level.offsets);
  }
  Tensor<T> verb_logits = ops::concat(verbs, 1);
  Tensor<T> noun_logits = ops::concat(nouns, 1);
  Tensor<T> pred_offsets = ops::concat(offsets, 1);
  const std::size_t batch = verb_logits.extent(0), n = verb_logits.extent(1);
  const std::size_t nv = verb_logits.extent(2), nc = noun_logits.extent(2);
  if (assignments.size() != batch) {
    fail(ErrorKind::kShape, "total_loss got " + std::to_string(assignments.size()) +
                                " assignments for batch " + std::to_string(batch));
  }
  const bool with_action = config.lambda_action != 0.0;
  std::vector<T> verb_t(batch * n * nv, T(0)), noun_t(batch * n * nc, T(0));
  std::vector<T> action_t(with_action ? batch * n * nv * nc : 0, T(0));
  std::vector<T> row_weight(batch * n, T(0)), reg_t(batch * n * 2, T(0));
  std::vector<std::uint8_t> positive(batch * n, 0);
  LossBreakdown<T> out;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto& locs = assignments[b].locations;
    if (locs.size() != n) {
      fail(ErrorKind::kShape, "assignment for batch element " + std::to_string(b) + " has " +
                                  std::to_string(locs.size()) + " locations, outputs have " +
                                  std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = b * n + i;
      const auto& loc = locs[i];
      row_weight[row] = loc.valid ? T(1) : T(0);
      if (!loc.positive) continue;
      positive[row] = 1;
      ++out.positive_count;
      verb_t[row * nv + loc.verb] = T(1);
      noun_t[row * nc + loc.noun] = T(1);
      if (with_action) action_t[row * nv * nc + loc.verb * nc + loc.noun] = T(1);
      reg_t[2 * row] = static_cast<T>(loc.d_start);
      reg_t[2 * row + 1] = static_cast<T>(loc.d_end);
    }
  }

  Tensor<T> verb = focal_loss<T>(verb_logits, verb_t, config.focal, row_weight);
  Tensor<T> noun = focal_loss<T>(noun_logits, noun_t, config.focal, row_weight);
  Tensor<T> reg = iou_loss<T>(pred_offsets, reg_t, positive);
  Tensor<T> total = ops::add(ops::add(verb, noun), ops::mul_scalar(reg, static_cast<T>(config.lambda_reg)));
  if (with_action) {
    Tensor<T> action = action_focal_loss<T>(verb_logits, noun_logits, action_t, config.focal, row_weight);
    out.action_focal = static_cast<double>(action.item());
    total = ops::add(total, ops::mul_scalar(action, static_cast<T>(config.lambda_action)));
  }
  out.verb_focal = static_cast<double>(verb.item());
  out.noun_focal = static_cast<double>(noun.item());
  out.iou_loss = static_cast<double>(reg.item());
  out.total_value = static_cast<double>(total.item());
  out.total = total;
  return out;
}

#define OADT_INSTANTIATE_LOSS(T)                                                                  \
  template Tensor<T> focal_loss(const Tensor<T>&, std::span<const T>, const FocalOptions&,        \
                                std::span<const T>);                                              \
  template Tensor<T> action_focal_loss(const Tensor<T>&, const Tensor<T>&, std::span<const T>,    \
                                       const FocalOptions&, std::span<const T>);                  \
  template Tensor<T> iou_loss(const Tensor<T>&, std::span<const T>, std::span<const std::uint8_t>); \
  template LossBreakdown<T> total_loss(const PyramidOutputs<T>&, std::span<const AssignmentResult>, \
                                       const LossConfig&);

OADT_INSTANTIATE_LOSS(float)
OADT_INSTANTIATE_LOSS(double)

#undef OADT_INSTANTIATE_LOSS

}  // namespace oadt
