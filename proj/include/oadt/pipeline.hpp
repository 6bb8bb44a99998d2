// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include "oadt/dataset.hpp"
#include "oadt/model.hpp"
#include "oadt/postprocess.hpp"

namespace oadt {

struct Predictions {
  PredictionSet candidates;  // decoded, before suppression
  PredictionSet detections;  // after Soft-NMS
};

// Runs every video through the model one at a time, without dropout.
Predictions predict_dataset(const OadtModel<float>& model, const Dataset& data,
                            const DecodeConfig& config);

}  // namespace oadt
