// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>

namespace oadt {

/// Sliding-window clock of a feature sequence. Feature i covers frames
/// [i*stride, i*stride + window); its timestamp is the window midpoint.
struct TimeCalibration {
  double fps = 30.0;
  std::size_t window_frames = 32;
  std::size_t stride_frames = 16;
  double duration_sec = 0.0;

  // Seconds between consecutive feature timestamps.
  double step_sec() const { return static_cast<double>(stride_frames) / fps; }

  double center_sec(std::size_t index) const;

  // Closest feature index to `sec`, clamped to [0, length).
  std::size_t nearest_index(double sec, std::size_t length) const;

  // Number of windows that fit in duration_sec (at least 1).
  std::size_t expected_length() const;
};

/// Timestamp of pyramid cell `index` at `level`: the mean timestamp of the
/// 2^level base features it pools. Throws when index >= level_length.
double candidate_time(std::size_t level, std::size_t index, std::size_t level_length,
                      const TimeCalibration& calib);

}  // namespace oadt
