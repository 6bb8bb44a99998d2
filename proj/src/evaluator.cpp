// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>
#include <tuple>

#include "oadt/segment.hpp"

namespace oadt {

std::string to_string(Task t) {
  switch (t) {
    case Task::kVerb: return "Verb";
    case Task::kNoun: return "Noun";
    case Task::kAction: return "Action";
  }
  return "?";
}

std::uint64_t task_label(Task task, std::size_t verb, std::size_t noun) {
  switch (task) {
    case Task::kVerb: return verb;
    case Task::kNoun: return noun;
    case Task::kAction: return (static_cast<std::uint64_t>(verb) << 32) | noun;
  }
  return 0;
}

void EvalConfig::validate() const {
  if (thresholds.empty()) fail(ErrorKind::kConfig, "eval thresholds must not be empty");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] <= 1.0)) {
      fail(ErrorKind::kConfig, "eval thresholds must lie in (0, 1]");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      fail(ErrorKind::kConfig, "eval thresholds must be strictly increasing");
    }
  }
  if (tasks.empty()) fail(ErrorKind::kConfig, "eval tasks must not be empty");
}

double interpolated_ap(std::span<const bool> hits, std::size_t num_ground_truth) {
  if (num_ground_truth == 0) return 0.0;
  std::vector<double> precision(hits.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    tp += hits[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (std::size_t i = hits.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  // Recall only moves at hits, by 1/G each time.
  double area = 0.0;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (hits[i]) area += precision[i];
  }
  return area / static_cast<double>(num_ground_truth);
}

std::optional<double> match_and_ap(std::span<const ScoredInterval> predictions,
                                   std::span<const Interval> ground_truth, double threshold) {
  if (ground_truth.empty()) return std::nullopt;
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = predictions[a];
    const auto& y = predictions[b];
    if (x.score != y.score) return x.score > y.score;
    return std::tie(x.video_id, x.start_sec, x.end_sec, a) <
           std::tie(y.video_id, y.start_sec, y.end_sec, b);
  });

  std::map<std::string_view, std::vector<std::size_t>> by_video;
  for (std::size_t g = 0; g < ground_truth.size(); ++g) {
    by_video[ground_truth[g].video_id].push_back(g);
  }
  std::vector<bool> claimed(ground_truth.size(), false);
  std::vector<bool> hits_storage;
  hits_storage.reserve(order.size());
  for (std::size_t p : order) {
    const auto& pred = predictions[p];
    bool hit = false;
    auto it = by_video.find(pred.video_id);
    if (it != by_video.end()) {
      double best_iou = -1.0;
      std::size_t best = 0;
      for (std::size_t g : it->second) {
        if (claimed[g]) continue;
        const double iou = iou1d(pred.start_sec, pred.end_sec, ground_truth[g].start_sec,
                                 ground_truth[g].end_sec);
        if (iou >= threshold && iou > best_iou) {
          best_iou = iou;
          best = g;
        }
      }
      if (best_iou >= 0.0) {
        claimed[best] = true;
        hit = true;
      }
    }
    hits_storage.push_back(hit);
  }
  // std::vector<bool> has no contiguous storage; copy into plain bools.
  std::unique_ptr<bool[]> hits(new bool[hits_storage.size() + 1]);
  for (std::size_t i = 0; i < hits_storage.size(); ++i) hits[i] = hits_storage[i];
  return interpolated_ap(std::span<const bool>(hits.get(), hits_storage.size()),
                         ground_truth.size());
}

const TaskReport& EvalReport::task(Task t) const {
  for (const auto& r : tasks) {
    if (r.task == t) return r;
  }
  fail(ErrorKind::kContract, "report has no " + to_string(t) + " rows");
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json doc;
  doc["thresholds"] = thresholds;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : tasks) {
    rows.push_back({{"task", to_string(r.task)},
                    {"ap", r.ap},
                    {"average", r.average},
                    {"num_classes", r.num_classes},
                    {"num_ground_truth", r.num_ground_truth},
                    {"num_predictions", r.num_predictions}});
  }
  doc["tasks"] = std::move(rows);
  return doc;
}

EvalReport evaluate(const PredictionSet& predictions, const AnnotationSet& annotations,
                    const EvalConfig& config) {
  config.validate();
  std::vector<std::string> unknown;
  for (const auto& [video, dets] : predictions) {
    if (annotations.find(video) == nullptr) unknown.push_back(video);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& id : unknown) list += (list.empty() ? "" : ", ") + id;
    fail(ErrorKind::kValidation, "predictions name videos missing from the annotations: " + list);
  }

  EvalReport report;
  report.thresholds = config.thresholds;
  for (Task task : config.tasks) {
    std::map<std::uint64_t, std::vector<Interval>> gt;
    std::map<std::uint64_t, std::vector<ScoredInterval>> preds;
    TaskReport row;
    row.task = task;
    for (const auto& video : annotations.videos) {
      for (const auto& s : video.segments) {
        gt[task_label(task, s.verb, s.noun)].push_back({video.video_id, s.start_sec, s.end_sec});
        ++row.num_ground_truth;
      }
    }
    for (const auto& [video, dets] : predictions) {
      for (const auto& d : dets) {
        preds[task_label(task, d.verb, d.noun)].push_back(
            {video, d.start_sec, d.end_sec, d.score});
        ++row.num_predictions;
      }
    }
    row.num_classes = gt.size();
    for (double threshold : config.thresholds) {
      double sum = 0.0;
      for (const auto& [label, intervals] : gt) {
        auto it = preds.find(label);
        const std::span<const ScoredInterval> p =
            it == preds.end() ? std::span<const ScoredInterval>{} : it->second;
        sum += *match_and_ap(p, intervals, threshold);
      }
      row.ap.push_back(gt.empty() ? 0.0 : sum / static_cast<double>(gt.size()));
    }
    row.average = std::accumulate(row.ap.begin(), row.ap.end(), 0.0) /
                  static_cast<double>(row.ap.size());
    report.tasks.push_back(std::move(row));
  }
  return report;
}

EvalReport evaluate_files(const std::string& predictions_path,
                          const std::string& annotations_path, const EvalConfig& config) {
  const PredictionSet predictions = read_predictions(predictions_path);
  const AnnotationSet annotations = read_annotations(annotations_path);
  return evaluate(predictions, annotations, config);
}

std::string render_report(const EvalReport& report) {
  char cell[64];
  std::string out;
  std::snprintf(cell, sizeof(cell), "%-8s", "Task");
  out += cell;
  for (double t : report.thresholds) {
    char label[32];
    std::snprintf(label, sizeof(label), "@%g", t);
    std::snprintf(cell, sizeof(cell), "%8s", label);
    out += cell;
  }
  std::snprintf(cell, sizeof(cell), "%8s", "Avg");
  out += cell;
  out += "\n";
  for (const auto& row : report.tasks) {
    std::snprintf(cell, sizeof(cell), "%-8s", to_string(row.task).c_str());
    out += cell;
    for (double ap : row.ap) {
      std::snprintf(cell, sizeof(cell), "%8.2f", 100.0 * ap);
      out += cell;
    }
    std::snprintf(cell, sizeof(cell), "%8.2f", 100.0 * row.average);
    out += cell;
    out += "\n";
  }
  return out;
}

PredictionSet predictions_from_annotations(const AnnotationSet& annotations,
                                           std::size_t num_nouns) {
  PredictionSet set;
  for (const auto& video : annotations.videos) {
    auto& dets = set[video.video_id];
    for (const auto& s : video.segments) {
      dets.push_back({video.video_id, s.start_sec, s.end_sec, s.verb, s.noun,
                      s.verb * num_nouns + s.noun, 1.0});
    }
    std::sort(dets.begin(), dets.end(), detection_before);
  }
  return set;
}

}  // namespace oadt
