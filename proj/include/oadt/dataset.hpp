// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "oadt/segment.hpp"
#include "oadt/timing.hpp"

namespace oadt {

/// T x D clip features of one video. The binary file stores only the
/// grid; id and calibration come from the annotation document.
struct FeatureSequence {
  std::string video_id;
  std::size_t length = 0;  // T
  std::size_t dim = 0;     // D
  std::vector<float> values;
  TimeCalibration calib;

  std::span<const float> row(std::size_t t) const {
    return std::span<const float>(values).subspan(t * dim, dim);
  }
};

inline constexpr std::uint32_t kFeatureVersion = 1;

// "OADF" | u32 version | u32 T | u32 D | T*D f32, all little-endian.
std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::span<const std::uint8_t> bytes, const std::string& source);
FeatureSequence read_features(const std::string& path);
void write_features(const std::string& path, const FeatureSequence& seq);

struct VideoAnnotation {
  std::string video_id;
  double duration_sec = 0.0;
  double fps = 30.0;
  std::size_t window_frames = 32;
  std::size_t stride_frames = 16;
  std::string feature_file;
  std::vector<GroundTruthSegment> segments;

  TimeCalibration calib() const {
    return TimeCalibration{fps, window_frames, stride_frames, duration_sec};
  }
};

struct Vocabulary {
  std::size_t num_verbs = 0;
  std::size_t num_nouns = 0;
};

struct AnnotationSet {
  std::vector<VideoAnnotation> videos;
  std::optional<Vocabulary> vocabulary;
  std::vector<std::string> warnings;  // unknown fields, in document order

  const VideoAnnotation* find(std::string_view video_id) const;
};

/// Parses `{"videos": [...], "num_verbs"?, "num_nouns"?}`. Class ids are
/// checked against `vocabulary` or, failing that, the document's own.
AnnotationSet parse_annotations(std::string_view text, const std::string& source,
                                std::optional<Vocabulary> vocabulary = std::nullopt);
AnnotationSet read_annotations(const std::string& path,
                               std::optional<Vocabulary> vocabulary = std::nullopt);
nlohmann::json annotations_to_json(const AnnotationSet& set);
void write_annotations(const std::string& path, const AnnotationSet& set);

struct Video {
  VideoAnnotation annotation;
  FeatureSequence features;
};

struct Dataset {
  std::vector<Video> videos;
  std::size_t feature_dim = 0;
  Vocabulary vocabulary;
};

/// Reads the annotation file plus every feature file it names (relative
/// paths resolve against the annotation file's directory). Rejects mixed
/// feature dims and T that disagrees with duration/fps/window/stride.
Dataset load_dataset(const std::string& annotation_path);

struct SynthSpec {
  std::size_t num_videos = 20;
  double min_duration_sec = 20.0;
  double max_duration_sec = 40.0;
  std::size_t num_verbs = 3;
  std::size_t num_nouns = 4;
  std::size_t feature_dim = 32;
  double snr = 4.0;
  std::uint64_t seed = 7;
  double fps = 30.0;
  std::size_t window_frames = 32;
  std::size_t stride_frames = 16;
  std::size_t min_segments = 1;
  std::size_t max_segments = 5;
  // Segment extents in feature steps.
  std::size_t min_segment_steps = 2;
  std::size_t max_segment_steps = 24;

  void validate() const;
  nlohmann::json to_json() const;
  // Flat document; unknown keys are a config error.
  static SynthSpec from_json(const nlohmann::json& doc);
};

struct SynthOutput {
  AnnotationSet annotations;
  std::vector<FeatureSequence> features;  // parallel to annotations.videos
};

/// Seeded synthetic corpus: unit Gaussian noise, plus `snr` on the channel
/// block of the active verb and on the block of the active noun while a
/// segment is in progress. Segments never overlap.
SynthOutput synthesize(const SynthSpec& spec);

// Writes <dir>/annotations.json and <dir>/features/<id>.oadf.
void write_synthetic(const SynthOutput& out, const std::string& dir);

}  // namespace oadt
