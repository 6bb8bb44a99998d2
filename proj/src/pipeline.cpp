// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/pipeline.hpp"

namespace oadt {

Predictions predict_dataset(const OadtModel<float>& model, const Dataset& data,
                            const DecodeConfig& config) {
  Predictions out;
  for (const auto& video : data.videos) {
    const auto& f = video.features;
    const Tensor<float> x({1, f.length, f.dim}, f.values);
    const auto outputs = model.forward(x, nn::PaddingMask::all_valid(1, f.length));
    auto candidates = decode(outputs, 0, video.annotation.video_id, f.calib, config);
    out.detections[video.annotation.video_id] = soft_nms(candidates, config);
    out.candidates[video.annotation.video_id] = std::move(candidates);
  }
  return out;
}

}  // namespace oadt
