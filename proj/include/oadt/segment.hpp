// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>

namespace oadt {

struct GroundTruthSegment {
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::size_t verb = 0;
  std::size_t noun = 0;

  double length() const { return end_sec - start_sec; }
  bool operator==(const GroundTruthSegment&) const = default;
};

/// Temporal IoU |a ∩ b| / |a ∪ b|. Zero-length or reversed segments throw.
double iou1d(double a_start, double a_end, double b_start, double b_end);

}  // namespace oadt
