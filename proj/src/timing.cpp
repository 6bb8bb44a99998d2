// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/timing.hpp"

#include <cmath>
#include <string>

#include "oadt/error.hpp"

namespace oadt {

double TimeCalibration::center_sec(std::size_t index) const {
  return (static_cast<double>(index * stride_frames) + 0.5 * static_cast<double>(window_frames)) /
         fps;
}

std::size_t TimeCalibration::nearest_index(double sec, std::size_t length) const {
  const double raw = (sec * fps - 0.5 * static_cast<double>(window_frames)) /
                     static_cast<double>(stride_frames);
  const double rounded = std::round(raw);
  if (rounded <= 0.0 || length == 0) return 0;
  const auto index = static_cast<std::size_t>(rounded);
  return index >= length ? length - 1 : index;
}

std::size_t TimeCalibration::expected_length() const {
  const double frames = duration_sec * fps - static_cast<double>(window_frames);
  if (frames < 0.0) return 1;
  // Guard against 31.999999 from the float product.
  const double steps = std::floor(frames / static_cast<double>(stride_frames) + 1e-9);
  return static_cast<std::size_t>(steps) + 1;
}

double candidate_time(std::size_t level, std::size_t index, std::size_t level_length,
                      const TimeCalibration& calib) {
  if (index >= level_length) {
    fail(ErrorKind::kContract, "candidate index " + std::to_string(index) +
                                   " out of range for level length " +
                                   std::to_string(level_length));
  }
  const double cells = std::ldexp(1.0, static_cast<int>(level));
  const double first = static_cast<double>(index) * cells;
  const double mean_index = first + 0.5 * (cells - 1.0);
  return (mean_index * static_cast<double>(calib.stride_frames) +
          0.5 * static_cast<double>(calib.window_frames)) /
         calib.fps;
}

}  // namespace oadt
