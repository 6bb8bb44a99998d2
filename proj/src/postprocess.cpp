// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string_view>
#include <tuple>

#include "oadt/binary_io.hpp"
#include "oadt/segment.hpp"

namespace oadt {

using nlohmann::json;

bool detection_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.start_sec, a.end_sec, a.action, a.video_id) <
         std::tie(b.start_sec, b.end_sec, b.action, b.video_id);
}

void DecodeConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::kConfig, "invalid decode config: " + what);
  };
  require(pre_nms_topk >= 1, "pre_nms_topk must be >= 1");
  require(score_threshold >= 0.0 && score_threshold <= 1.0, "score_threshold must be in [0, 1]");
  require(pairs_per_location >= 1, "pairs_per_location must be >= 1");
  require(soft_nms.sigma > 0.0, "nms_sigma must be > 0");
  require(soft_nms.iou_threshold >= 0.0 && soft_nms.iou_threshold <= 1.0,
          "nms_iou_threshold must be in [0, 1]");
  require(max_detections >= 1, "max_detections must be >= 1");
}

std::string to_string(Combination c) { return c == Combination::kMultiply ? "multiply" : "add"; }

std::string to_string(SoftNmsMethod m) {
  return m == SoftNmsMethod::kGaussian ? "gaussian" : "linear";
}

Combination parse_combination(const std::string& text) {
  if (text == "multiply") return Combination::kMultiply;
  if (text == "add") return Combination::kAdd;
  fail(ErrorKind::kConfig, "combination must be 'multiply' or 'add', got '" + text + "'");
}

SoftNmsMethod parse_soft_nms_method(const std::string& text) {
  if (text == "gaussian") return SoftNmsMethod::kGaussian;
  if (text == "linear") return SoftNmsMethod::kLinear;
  fail(ErrorKind::kConfig, "nms_method must be 'gaussian' or 'linear', got '" + text + "'");
}

double combine_scores(double verb_score, double noun_score, Combination c) {
  return c == Combination::kMultiply ? verb_score * noun_score : 0.5 * (verb_score + noun_score);
}

double quantize_score(double score) {
  return std::max(1e-6, std::round(score * 1e6) / 1e6);
}

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Indices of the k largest values, largest first, ties to the lower index.
std::vector<std::size_t> top_indices(const std::vector<double>& values, std::size_t k) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      return values[a] != values[b] ? values[a] > values[b] : a < b;
                    });
  idx.resize(k);
  return idx;
}

}  // namespace

template <typename T>
std::vector<Detection> decode(const PyramidOutputs<T>& outputs, std::size_t batch_index,
                              const std::string& video_id, const TimeCalibration& calib,
                              const DecodeConfig& config) {
  config.validate();
  std::vector<Detection> out;
  for (std::size_t l = 0; l < outputs.levels.size(); ++l) {
    const auto& level = outputs.levels[l];
    const std::size_t length = level.verb_logits.extent(1);
    const std::size_t num_verbs = level.verb_logits.extent(2);
    const std::size_t num_nouns = level.noun_logits.extent(2);
    const auto verb_data = level.verb_logits.data();
    const auto noun_data = level.noun_logits.data();
    const auto offset_data = level.offsets.data();
    const double unit_sec = static_cast<double>(level.stride) * calib.step_sec();
    const std::size_t k = config.pairs_per_location;

    std::vector<double> verb_scores(num_verbs), noun_scores(num_nouns);
    for (std::size_t i = 0; i < length; ++i) {
      if (!level.mask.valid(batch_index, i)) continue;
      const std::size_t row = batch_index * length + i;
      for (std::size_t v = 0; v < num_verbs; ++v) {
        verb_scores[v] = sigmoid(static_cast<double>(verb_data[row * num_verbs + v]));
      }
      for (std::size_t n = 0; n < num_nouns; ++n) {
        noun_scores[n] = sigmoid(static_cast<double>(noun_data[row * num_nouns + n]));
      }
      const double center = candidate_time(l, i, length, calib);
      double start = center - static_cast<double>(offset_data[row * 2]) * unit_sec;
      double end = center + static_cast<double>(offset_data[row * 2 + 1]) * unit_sec;
      if (calib.duration_sec > 0.0) {
        start = std::clamp(start, 0.0, calib.duration_sec);
        end = std::clamp(end, 0.0, calib.duration_sec);
      } else {
        start = std::max(start, 0.0);
      }
      if (!(end > start)) continue;

      // Both combinations are monotone in each argument, so the best k pairs
      // lie within the top-k verbs crossed with the top-k nouns.
      std::vector<Detection> pairs;
      for (std::size_t v : top_indices(verb_scores, k)) {
        for (std::size_t n : top_indices(noun_scores, k)) {
          const double score = combine_scores(verb_scores[v], noun_scores[n], config.combination);
          pairs.push_back({video_id, start, end, v, n, v * num_nouns + n, quantize_score(score)});
        }
      }
      std::sort(pairs.begin(), pairs.end(), detection_before);
      if (pairs.size() > k) pairs.resize(k);
      for (auto& d : pairs) {
        if (d.score >= config.score_threshold) out.push_back(std::move(d));
      }
    }
  }
  std::sort(out.begin(), out.end(), detection_before);
  if (out.size() > config.pre_nms_topk) out.resize(config.pre_nms_topk);
  return out;
}

template std::vector<Detection> decode(const PyramidOutputs<float>&, std::size_t,
                                       const std::string&, const TimeCalibration&,
                                       const DecodeConfig&);
template std::vector<Detection> decode(const PyramidOutputs<double>&, std::size_t,
                                       const std::string&, const TimeCalibration&,
                                       const DecodeConfig&);

std::vector<Detection> soft_nms(std::vector<Detection> detections, const DecodeConfig& config) {
  config.validate();
  const auto& nms = config.soft_nms;
  std::erase_if(detections,
                [&](const Detection& d) { return d.score < config.score_threshold; });
  // Stable grouping by class keeps the result independent of input order.
  std::sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
    return a.action != b.action ? a.action < b.action : detection_before(a, b);
  });
  std::vector<Detection> kept;
  std::size_t group_begin = 0;
  while (group_begin < detections.size()) {
    std::size_t group_end = group_begin;
    while (group_end < detections.size() &&
           detections[group_end].action == detections[group_begin].action) {
      ++group_end;
    }
    std::vector<Detection> pool(detections.begin() + static_cast<std::ptrdiff_t>(group_begin),
                                detections.begin() + static_cast<std::ptrdiff_t>(group_end));
    while (!pool.empty()) {
      auto best_it = std::min_element(pool.begin(), pool.end(), detection_before);
      Detection best = *best_it;
      pool.erase(best_it);
      for (auto& d : pool) {
        const double iou = iou1d(best.start_sec, best.end_sec, d.start_sec, d.end_sec);
        if (nms.method == SoftNmsMethod::kGaussian) {
          d.score *= std::exp(-(iou * iou) / nms.sigma);
        } else if (iou > nms.iou_threshold) {
          d.score *= 1.0 - iou;
        }
      }
      std::erase_if(pool, [&](const Detection& d) { return d.score < config.score_threshold; });
      kept.push_back(std::move(best));
    }
    group_begin = group_end;
  }
  std::sort(kept.begin(), kept.end(), detection_before);
  if (kept.size() > config.max_detections) kept.resize(config.max_detections);
  return kept;
}

PredictionSet ensemble(std::span<const PredictionSet> candidates, std::span<const double> weights,
                       const DecodeConfig& config) {
  if (candidates.empty()) fail(ErrorKind::kValidation, "ensemble needs at least one model");
  std::vector<double> w(weights.begin(), weights.end());
  if (w.empty()) w.assign(candidates.size(), 1.0 / static_cast<double>(candidates.size()));
  if (w.size() != candidates.size()) {
    fail(ErrorKind::kValidation, "got " + std::to_string(w.size()) + " weights for " +
                                     std::to_string(candidates.size()) + " models");
  }
  double sum = 0.0;
  for (double x : w) {
    if (!(x > 0.0)) fail(ErrorKind::kValidation, "ensemble weights must be positive");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    fail(ErrorKind::kValidation, "ensemble weights must sum to 1, got " + std::to_string(sum));
  }

  using Key = std::tuple<double, double, std::size_t, std::size_t>;
  std::map<std::string, std::map<Key, Detection>> fused;
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    for (const auto& [video, dets] : candidates[m]) {
      auto& bucket = fused[video];
      for (const auto& d : dets) {
        const Key key{d.start_sec, d.end_sec, d.verb, d.noun};
        auto [it, inserted] = bucket.try_emplace(key, d);
        if (inserted) {
          it->second.score = w[m] * d.score;
        } else {
          it->second.score += w[m] * d.score;
        }
      }
    }
  }
  PredictionSet result;
  for (auto& [video, bucket] : fused) {
    std::vector<Detection> all;
    all.reserve(bucket.size());
    for (auto& [key, d] : bucket) all.push_back(std::move(d));
    auto survivors = soft_nms(std::move(all), config);
    for (auto& d : survivors) d.score = quantize_score(d.score);
    result[video] = std::move(survivors);
  }
  return result;
}

json predictions_to_json(const PredictionSet& set) {
  json doc = json::object();
  for (const auto& [video, dets] : set) {
    json list = json::array();
    std::vector<Detection> sorted = dets;
    std::sort(sorted.begin(), sorted.end(), detection_before);
    for (const auto& d : sorted) {
      list.push_back({{"start_sec", d.start_sec},
                      {"end_sec", d.end_sec},
                      {"verb", d.verb},
                      {"noun", d.noun},
                      {"action", d.action},
                      {"score", quantize_score(d.score)}});
    }
    doc[video] = std::move(list);
  }
  return doc;
}

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(ErrorKind::kParse, where + ": missing field '" + key + "'");
  return obj.at(key);
}

double number_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) fail(ErrorKind::kParse, where + ": '" + key + "' must be a number");
  return v.get<double>();
}

std::size_t index_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_unsigned()) {
    fail(ErrorKind::kParse, where + ": '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

PredictionSet predictions_from_json(const json& doc, const std::string& source) {
  if (!doc.is_object()) fail(ErrorKind::kParse, source + ": top level must be an object");
  PredictionSet set;
  for (const auto& [video, list] : doc.items()) {
    if (!list.is_array()) fail(ErrorKind::kParse, source + ": '" + video + "' must be an array");
    auto& dets = set[video];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = source + ": " + video + "[" + std::to_string(i) + "]";
      const json& item = list[i];
      if (!item.is_object()) fail(ErrorKind::kParse, where + " must be an object");
      Detection d;
      d.video_id = video;
      d.start_sec = number_field(item, "start_sec", where);
      d.end_sec = number_field(item, "end_sec", where);
      d.verb = index_field(item, "verb", where);
      d.noun = index_field(item, "noun", where);
      d.action = index_field(item, "action", where);
      d.score = number_field(item, "score", where);
      if (!(d.start_sec < d.end_sec)) {
        fail(ErrorKind::kValidation, where + ": start_sec must be < end_sec");
      }
      if (!(d.score > 0.0 && d.score <= 1.0)) {
        fail(ErrorKind::kValidation, where + ": score must be in (0, 1]");
      }
      dets.push_back(std::move(d));
    }
    std::sort(dets.begin(), dets.end(), detection_before);
  }
  return set;
}

void write_predictions(const std::string& path, const PredictionSet& set) {
  binary::write_text(path, predictions_to_json(set).dump(2) + "\n");
}

PredictionSet read_predictions(const std::string& path) {
  const auto bytes = binary::read_file(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, path + ": " + e.what());
  }
  return predictions_from_json(doc, path);
}

}  // namespace oadt
