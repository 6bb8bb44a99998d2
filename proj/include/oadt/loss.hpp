// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <limits>
#include <span>
#include <vector>

#include "oadt/model.hpp"
#include "oadt/segment.hpp"
#include "oadt/timing.hpp"

namespace oadt {

// Per-level padded and valid extents of one video inside a batch.
struct PyramidGeometry {
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> valid_lengths;

  static PyramidGeometry make(std::size_t padded_length, std::size_t valid_length,
                              std::size_t levels);
  std::size_t levels() const { return lengths.size(); }
  std::size_t total_locations() const;
};

struct LevelRange {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

// Segment lengths (base feature units) level l is responsible for:
// [4*2^l, 8*2^l), with level 0 starting at 0 and the top level unbounded.
LevelRange regression_range(std::size_t level, std::size_t levels);

struct LocationTarget {
  std::size_t level = 0;
  std::size_t index = 0;
  double time_sec = 0.0;
  bool valid = false;
  bool positive = false;
  int segment = -1;
  std::size_t verb = 0;
  std::size_t noun = 0;
  // Distances to the segment ends in level units (base units / 2^level).
  double d_start = 0.0;
  double d_end = 0.0;
};

struct AssignmentResult {
  std::vector<LocationTarget> locations;  // level-major, matches concat order

  std::size_t positive_count() const;
};

/// Marks location (l, i) positive for segment s when its timestamp lies in
/// [start, end] and the segment length falls in regression_range(l). Among
/// several candidates the shortest segment wins (ties by start, end, verb,
/// noun), which keeps the result independent of segment order.
AssignmentResult assign(std::span<const GroundTruthSegment> segments,
                        const PyramidGeometry& geometry, const TimeCalibration& calib);

struct FocalOptions {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// Sigmoid focal loss summed over all elements and divided by the number of
/// rows (last axis) holding a positive target, min 1. `row_weight` (one per
/// row, optional) zeroes out padded rows.
template <typename T>
Tensor<T> focal_loss(const Tensor<T>& logits, std::span<const T> targets,
                     const FocalOptions& options, std::span<const T> row_weight = {});

/// Focal loss on action probabilities p = sigmoid(verb) * sigmoid(noun) over
/// all V*C pairs; targets are laid out [..., V*C] with action = v*C + n.
template <typename T>
Tensor<T> action_focal_loss(const Tensor<T>& verb_logits, const Tensor<T>& noun_logits,
                            std::span<const T> targets, const FocalOptions& options,
                            std::span<const T> row_weight = {});

/// Mean over positive rows of 1 - IoU between predicted and target
/// (d_start, d_end) pairs sharing the same centre. Zero with no positives.
template <typename T>
Tensor<T> iou_loss(const Tensor<T>& pred_offsets, std::span<const T> target_offsets,
                   std::span<const std::uint8_t> positive);

struct LossConfig {
  FocalOptions focal;
  double lambda_reg = 1.0;
  double lambda_action = 0.0;
};

template <typename T>
struct LossBreakdown {
  Tensor<T> total;
  double verb_focal = 0.0;
  double noun_focal = 0.0;
  double action_focal = 0.0;
  double iou_loss = 0.0;
  double total_value = 0.0;
  std::size_t positive_count = 0;
};

template <typename T>
LossBreakdown<T> total_loss(const PyramidOutputs<T>& outputs,
                            std::span<const AssignmentResult> assignments,
                            const LossConfig& config);

}  // namespace oadt
