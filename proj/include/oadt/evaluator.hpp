// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oadt/dataset.hpp"
#include "oadt/postprocess.hpp"

namespace oadt {

enum class Task { kVerb, kNoun, kAction };

std::string to_string(Task t);  // "Verb", "Noun", "Action"

// Class key of a (verb, noun) label under `task`. Actions keep the pair.
std::uint64_t task_label(Task task, std::size_t verb, std::size_t noun);

struct EvalConfig {
  std::vector<double> thresholds{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<Task> tasks{Task::kVerb, Task::kNoun, Task::kAction};

  void validate() const;
};

// One class's view of the data: predictions and ground truth already
// projected to a single label.
struct ScoredInterval {
  std::string video_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
  double score = 0.0;
};

struct Interval {
  std::string video_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
};

// Area under the precision/recall curve after replacing each precision by
// the maximum precision at equal or higher recall. `hits` lists the ranked
// predictions' true-positive flags.
double interpolated_ap(std::span<const bool> hits, std::size_t num_ground_truth);

/// Greedy matching: predictions in ranked order each claim the unmatched
/// ground truth of the same video with the highest tIoU >= threshold.
/// Returns nullopt when there is no ground truth.
std::optional<double> match_and_ap(std::span<const ScoredInterval> predictions,
                                   std::span<const Interval> ground_truth, double threshold);

struct TaskReport {
  Task task = Task::kAction;
  std::vector<double> ap;  // mAP per threshold
  double average = 0.0;
  std::size_t num_classes = 0;  // classes with ground truth
  std::size_t num_ground_truth = 0;
  std::size_t num_predictions = 0;
};

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<TaskReport> tasks;

  const TaskReport& task(Task t) const;
  nlohmann::json to_json() const;
};

/// Fails with kValidation naming every prediction video id that is absent
/// from the annotations.
EvalReport evaluate(const PredictionSet& predictions, const AnnotationSet& annotations,
                    const EvalConfig& config = {});
EvalReport evaluate_files(const std::string& predictions_path,
                          const std::string& annotations_path, const EvalConfig& config = {});

// Fixed-width table, one row per task, percentages with two decimals.
std::string render_report(const EvalReport& report);

// Ground truth restated as score-1 detections.
PredictionSet predictions_from_annotations(const AnnotationSet& annotations,
                                           std::size_t num_nouns);

}  // namespace oadt
