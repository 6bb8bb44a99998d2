// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oadt/model.hpp"
#include "oadt/timing.hpp"

namespace oadt {

struct Detection {
  std::string video_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
  std::size_t verb = 0;
  std::size_t noun = 0;
  std::size_t action = 0;  // verb * num_nouns + noun
  double score = 0.0;

  bool operator==(const Detection&) const = default;
};

// Total order used everywhere detections are ranked: score descending, then
// start, end and action ascending.
bool detection_before(const Detection& a, const Detection& b);

enum class Combination { kMultiply, kAdd };
enum class SoftNmsMethod { kGaussian, kLinear };

struct SoftNmsConfig {
  SoftNmsMethod method = SoftNmsMethod::kGaussian;
  double sigma = 0.5;
  // Linear variant only: decay applies when IoU exceeds this.
  double iou_threshold = 0.5;
};

struct DecodeConfig {
  std::size_t pre_nms_topk = 2000;
  double score_threshold = 0.001;
  Combination combination = Combination::kMultiply;
  // Verb-noun pairs kept per location, best first.
  std::size_t pairs_per_location = 3;
  SoftNmsConfig soft_nms;
  std::size_t max_detections = 200;

  void validate() const;
};

std::string to_string(Combination c);
std::string to_string(SoftNmsMethod m);
Combination parse_combination(const std::string& text);
SoftNmsMethod parse_soft_nms_method(const std::string& text);

double combine_scores(double verb_score, double noun_score, Combination c);

// Fixed 6-decimal quantisation applied to every emitted score, so a
// prediction file reproduces the in-memory values exactly.
double quantize_score(double score);

/// Candidates of batch element `batch_index` before suppression. Padded
/// locations are skipped; endpoints are clipped to [0, duration] and
/// zero-length results dropped.
template <typename T>
std::vector<Detection> decode(const PyramidOutputs<T>& outputs, std::size_t batch_index,
                              const std::string& video_id, const TimeCalibration& calib,
                              const DecodeConfig& config);

/// Class-aware Soft-NMS. Survivors come back sorted by detection_before and
/// capped at max_detections.
std::vector<Detection> soft_nms(std::vector<Detection> detections, const DecodeConfig& config);

using PredictionSet = std::map<std::string, std::vector<Detection>>;

/// Scales each model's candidates by its weight, merges candidates that
/// coincide in segment and class by summing their scores, and suppresses the
/// union once per video. Empty `weights` means uniform.
PredictionSet ensemble(std::span<const PredictionSet> candidates, std::span<const double> weights,
                       const DecodeConfig& config);

nlohmann::json predictions_to_json(const PredictionSet& set);
PredictionSet predictions_from_json(const nlohmann::json& doc, const std::string& source);
void write_predictions(const std::string& path, const PredictionSet& set);
PredictionSet read_predictions(const std::string& path);

}  // namespace oadt
