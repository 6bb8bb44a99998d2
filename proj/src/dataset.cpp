// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "oadt/binary_io.hpp"
#include "oadt/random.hpp"

namespace oadt {

namespace {
constexpr char kFeatureMagic[] = "OADF";
}  // namespace

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  if (seq.values.size() != seq.length * seq.dim) {
    fail(ErrorKind::kDimension, "feature sequence " + seq.video_id + " holds " +
                                    std::to_string(seq.values.size()) + " values for T=" +
                                    std::to_string(seq.length) + ", D=" + std::to_string(seq.dim));
  }
  binary::Writer w;
  w.bytes(std::string_view(kFeatureMagic, 4));
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(seq.length));
  w.u32(static_cast<std::uint32_t>(seq.dim));
  for (float v : seq.values) w.f32(v);
  return w.take();
}

FeatureSequence decode_features(std::span<const std::uint8_t> bytes, const std::string& source) {
  binary::Reader r(bytes, source);
  if (r.bytes(4, "magic") != std::string_view(kFeatureMagic, 4)) {
    fail(ErrorKind::kBadMagic, source + ": not an OADF feature file");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kFeatureVersion) {
    fail(ErrorKind::kVersion, source + ": feature file version " + std::to_string(version) +
                                  " (supported: " + std::to_string(kFeatureVersion) + ")");
  }
  FeatureSequence seq;
  seq.length = r.u32("T");
  seq.dim = r.u32("D");
  if (seq.length == 0 || seq.dim == 0) {
    fail(ErrorKind::kEmpty, source + ": feature file declares T=" + std::to_string(seq.length) +
                                ", D=" + std::to_string(seq.dim) + " (both must be >= 1)");
  }
  // T and D are both below 2^32, so their product fits; the byte count may not.
  const std::uint64_t values = static_cast<std::uint64_t>(seq.length) * seq.dim;
  if (values > r.remaining() / 4) {
    fail(ErrorKind::kTruncated, source + ": payload holds " + std::to_string(r.remaining()) +
                                    " bytes, header promises " + std::to_string(values) +
                                    " float values");
  }
  const std::size_t expected = static_cast<std::size_t>(values) * 4;
  if (r.remaining() > expected) {
    fail(ErrorKind::kDimension, source + ": payload holds " + std::to_string(r.remaining()) +
                                    " bytes, header promises " + std::to_string(expected));
  }
  seq.values.resize(seq.length * seq.dim);
  for (auto& v : seq.values) v = r.f32("payload");
  return seq;
}

FeatureSequence read_features(const std::string& path) {
  return decode_features(binary::read_file(path), path);
}

void write_features(const std::string& path, const FeatureSequence& seq) {
  binary::write_file(path, encode_features(seq));
}

const VideoAnnotation* AnnotationSet::find(std::string_view video_id) const {
  for (const auto& v : videos) {
    if (v.video_id == video_id) return &v;
  }
  return nullptr;
}

namespace {

using nlohmann::json;

template <typename V>
V field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) fail(ErrorKind::kParse, where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<V>();
  } catch (const json::exception&) {
    fail(ErrorKind::kParse, where + ": field '" + key + "' has the wrong type");
  }
}

template <typename V>
V field_or(const json& obj, const char* key, V fallback, const std::string& where) {
  return obj.contains(key) ? field<V>(obj, key, where) : fallback;
}

void note_unknown(const json& obj, std::initializer_list<const char*> known,
                  const std::string& where, std::vector<std::string>& warnings) {
  for (const auto& [key, value] : obj.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return key == k; });
    if (!ok) warnings.push_back(where + ": ignoring unknown field '" + key + "'");
  }
}

}  // namespace

AnnotationSet parse_annotations(std::string_view text, const std::string& source,
                                std::optional<Vocabulary> vocabulary) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kParse, source + ": " + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::kParse, source + ": top level must be an object");
  AnnotationSet set;
  note_unknown(doc, {"videos", "num_verbs", "num_nouns"}, source, set.warnings);
  if (doc.contains("num_verbs") || doc.contains("num_nouns")) {
    set.vocabulary = Vocabulary{field<std::size_t>(doc, "num_verbs", source),
                                field<std::size_t>(doc, "num_nouns", source)};
  }
  const std::optional<Vocabulary> vocab = vocabulary ? vocabulary : set.vocabulary;

  const json& videos = doc.contains("videos") ? doc.at("videos") : json();
  if (!videos.is_array()) fail(ErrorKind::kParse, source + ": 'videos' must be an array");
  std::set<std::string> seen;
  for (std::size_t vi = 0; vi < videos.size(); ++vi) {
    const json& v = videos[vi];
    const std::string where = source + ": videos[" + std::to_string(vi) + "]";
    if (!v.is_object()) fail(ErrorKind::kParse, where + " must be an object");
    note_unknown(v,
                 {"id", "duration_sec", "fps", "window_frames", "stride_frames", "feature_file",
                  "segments"},
                 where, set.warnings);
    VideoAnnotation a;
    a.video_id = field<std::string>(v, "id", where);
    a.duration_sec = field<double>(v, "duration_sec", where);
    a.fps = field<double>(v, "fps", where);
    a.window_frames = field_or<std::size_t>(v, "window_frames", 32, where);
    a.stride_frames = field_or<std::size_t>(v, "stride_frames", 16, where);
    a.feature_file = field_or<std::string>(v, "feature_file", "", where);
    if (!seen.insert(a.video_id).second) {
      fail(ErrorKind::kValidation, where + ": duplicate video id '" + a.video_id + "'");
    }
    if (!(a.duration_sec > 0.0) || !(a.fps > 0.0) || a.window_frames == 0 || a.stride_frames == 0) {
      fail(ErrorKind::kValidation,
           where + ": duration_sec, fps, window_frames and stride_frames must be positive");
    }
    const json& segs = v.contains("segments") ? v.at("segments") : json::array();
    if (!segs.is_array()) fail(ErrorKind::kParse, where + ": 'segments' must be an array");
    for (std::size_t si = 0; si < segs.size(); ++si) {
      const json& s = segs[si];
      const std::string swhere = where + ".segments[" + std::to_string(si) + "]";
      if (!s.is_object()) fail(ErrorKind::kParse, swhere + " must be an object");
      note_unknown(s, {"start_sec", "end_sec", "verb", "noun"}, swhere, set.warnings);
      GroundTruthSegment g;
      g.start_sec = field<double>(s, "start_sec", swhere);
      g.end_sec = field<double>(s, "end_sec", swhere);
      const auto verb = field<long long>(s, "verb", swhere);
      const auto noun = field<long long>(s, "noun", swhere);
      if (!(g.start_sec < g.end_sec)) {
        fail(ErrorKind::kValidation, swhere + ": start_sec must be < end_sec");
      }
      if (g.start_sec < 0.0 || g.end_sec > a.duration_sec + 1e-6) {
        fail(ErrorKind::kValidation, swhere + ": segment lies outside [0, duration_sec]");
      }
      if (verb < 0 || noun < 0 ||
          (vocab && (static_cast<std::size_t>(verb) >= vocab->num_verbs ||
                     static_cast<std::size_t>(noun) >= vocab->num_nouns))) {
        fail(ErrorKind::kValidation, swhere + ": class id out of range (verb " +
                                         std::to_string(verb) + ", noun " + std::to_string(noun) + ")");
      }
      g.verb = static_cast<std::size_t>(verb);
      g.noun = static_cast<std::size_t>(noun);
      a.segments.push_back(g);
    }
    set.videos.push_back(std::move(a));
  }
  return set;
}

AnnotationSet read_annotations(const std::string& path, std::optional<Vocabulary> vocabulary) {
  const auto bytes = binary::read_file(path);
  return parse_annotations(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                           path, vocabulary);
}

nlohmann::json annotations_to_json(const AnnotationSet& set) {
  json videos = json::array();
  for (const auto& a : set.videos) {
    json segs = json::array();
    for (const auto& g : a.segments) {
      segs.push_back({{"start_sec", g.start_sec}, {"end_sec", g.end_sec}, {"verb", g.verb},
                      {"noun", g.noun}});
    }
    videos.push_back({{"id", a.video_id},
                      {"duration_sec", a.duration_sec},
                      {"fps", a.fps},
                      {"window_frames", a.window_frames},
                      {"stride_frames", a.stride_frames},
                      {"feature_file", a.feature_file},
                      {"segments", std::move(segs)}});
  }
  json doc{{"videos", std::move(videos)}};
  if (set.vocabulary) {
    doc["num_verbs"] = set.vocabulary->num_verbs;
    doc["num_nouns"] = set.vocabulary->num_nouns;
  }
  return doc;
}

void write_annotations(const std::string& path, const AnnotationSet& set) {
  binary::write_text(path, annotations_to_json(set).dump(2) + "\n");
}

Dataset load_dataset(const std::string& annotation_path) {
  AnnotationSet set = read_annotations(annotation_path);
  if (set.videos.empty()) fail(ErrorKind::kEmpty, annotation_path + ": no videos");
  const auto root = std::filesystem::path(annotation_path).parent_path();
  Dataset ds;
  std::size_t max_verb = 0, max_noun = 0;
  for (auto& a : set.videos) {
    if (a.feature_file.empty()) {
      fail(ErrorKind::kParse, annotation_path + ": video '" + a.video_id + "' has no feature_file");
    }
    const auto fpath = std::filesystem::path(a.feature_file).is_absolute()
                           ? std::filesystem::path(a.feature_file)
                           : root / a.feature_file;
    FeatureSequence seq = read_features(fpath.string());
    seq.video_id = a.video_id;
    seq.calib = a.calib();
    if (ds.feature_dim == 0) ds.feature_dim = seq.dim;
    if (seq.dim != ds.feature_dim) {
      fail(ErrorKind::kDimension, fpath.string() + ": feature dim " + std::to_string(seq.dim) +
                                      " differs from dataset dim " + std::to_string(ds.feature_dim));
    }
    const std::size_t expected = seq.calib.expected_length();
    if (seq.length != expected) {
      fail(ErrorKind::kDimension, fpath.string() + ": T=" + std::to_string(seq.length) +
                                      " but duration/fps/window/stride imply T=" +
                                      std::to_string(expected));
    }
    for (const auto& g : a.segments) {
      max_verb = std::max(max_verb, g.verb);
      max_noun = std::max(max_noun, g.noun);
    }
    ds.videos.push_back(Video{std::move(a), std::move(seq)});
  }
  ds.vocabulary = set.vocabulary ? *set.vocabulary : Vocabulary{max_verb + 1, max_noun + 1};
  return ds;
}

void SynthSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::kValidation, "invalid synth spec: " + what);
  };
  require(num_videos >= 1, "num_videos must be >= 1");
  require(min_duration_sec > 0.0 && min_duration_sec <= max_duration_sec,
          "need 0 < min_duration_sec <= max_duration_sec");
  require(num_verbs >= 1 && num_nouns >= 1, "num_verbs and num_nouns must be >= 1");
  require(feature_dim >= num_verbs + num_nouns,
          "feature_dim must provide one channel block per verb and noun");
  require(snr >= 0.0, "snr must be >= 0");
  require(fps > 0.0 && window_frames >= 1 && stride_frames >= 1, "bad time calibration");
  require(min_segments >= 1 && min_segments <= max_segments, "need 1 <= min_segments <= max_segments");
  require(min_segment_steps >= 1 && min_segment_steps <= max_segment_steps,
          "need 1 <= min_segment_steps <= max_segment_steps");
  const TimeCalibration calib{fps, window_frames, stride_frames, min_duration_sec};
  const std::size_t shortest = calib.expected_length();
  const std::size_t needed = max_segments * min_segment_steps + (max_segments - 1);
  if (shortest < needed) {
    fail(ErrorKind::kValidation, "infeasible synth spec: shortest video has " +
                                     std::to_string(shortest) + " steps, packing " +
                                     std::to_string(max_segments) + " segments needs " +
                                     std::to_string(needed));
  }
}

nlohmann::json SynthSpec::to_json() const {
  return json{{"num_videos", num_videos},
              {"min_duration_sec", min_duration_sec},
              {"max_duration_sec", max_duration_sec},
              {"num_verbs", num_verbs},
              {"num_nouns", num_nouns},
              {"feature_dim", feature_dim},
              {"snr", snr},
              {"seed", seed},
              {"fps", fps},
              {"window_frames", window_frames},
              {"stride_frames", stride_frames},
              {"min_segments", min_segments},
              {"max_segments", max_segments},
              {"min_segment_steps", min_segment_steps},
              {"max_segment_steps", max_segment_steps}};
}

SynthSpec SynthSpec::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorKind::kConfig, "synth spec must be a flat object");
  SynthSpec s;
  const json defaults = s.to_json();
  for (const auto& [key, value] : doc.items()) {
    if (!defaults.contains(key)) fail(ErrorKind::kConfig, "unknown synth spec key '" + key + "'");
  }
  auto get = [&](const char* key, auto& out) {
    if (!doc.contains(key)) return;
    try {
      doc.at(key).get_to(out);
    } catch (const json::exception&) {
      fail(ErrorKind::kConfig, std::string("synth spec key '") + key + "' has the wrong type");
    }
  };
  get("num_videos", s.num_videos);
  get("min_duration_sec", s.min_duration_sec);
  get("max_duration_sec", s.max_duration_sec);
  get("num_verbs", s.num_verbs);
  get("num_nouns", s.num_nouns);
  get("feature_dim", s.feature_dim);
  get("snr", s.snr);
  get("seed", s.seed);
  get("fps", s.fps);
  get("window_frames", s.window_frames);
  get("stride_frames", s.stride_frames);
  get("min_segments", s.min_segments);
  get("max_segments", s.max_segments);
  get("min_segment_steps", s.min_segment_steps);
  get("max_segment_steps", s.max_segment_steps);
  return s;
}

SynthOutput synthesize(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SynthOutput out;
  out.annotations.vocabulary = Vocabulary{spec.num_verbs, spec.num_nouns};
  const std::size_t block = spec.feature_dim / (spec.num_verbs + spec.num_nouns);
  const std::size_t min_len =
      TimeCalibration{spec.fps, spec.window_frames, spec.stride_frames, spec.min_duration_sec}
          .expected_length();
  const std::size_t max_len =
      TimeCalibration{spec.fps, spec.window_frames, spec.stride_frames, spec.max_duration_sec}
          .expected_length();

  char id_buf[32];
  for (std::size_t vi = 0; vi < spec.num_videos; ++vi) {
    std::snprintf(id_buf, sizeof(id_buf), "synth_%04zu", vi);
    VideoAnnotation a;
    a.video_id = id_buf;
    a.fps = spec.fps;
    a.window_frames = spec.window_frames;
    a.stride_frames = spec.stride_frames;
    a.feature_file = "features/" + a.video_id + ".oadf";
    const auto length = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(min_len), static_cast<std::int64_t>(max_len)));
    a.duration_sec =
        static_cast<double>((length - 1) * spec.stride_frames + spec.window_frames) / spec.fps;
    const TimeCalibration calib = a.calib();

    const auto count = static_cast<std::size_t>(rng.between(
        static_cast<std::int64_t>(spec.min_segments), static_cast<std::int64_t>(spec.max_segments)));
    const std::size_t cap = std::min(spec.max_segment_steps, (length - (count - 1)) / count);
    std::vector<std::size_t> extents(count);
    std::size_t used = count - 1;
    for (auto& e : extents) {
      e = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(spec.min_segment_steps),
                                               static_cast<std::int64_t>(cap)));
      used += e;
    }
    // Spread the slack over the count + 1 gaps around the segments.
    const std::size_t slack = length - used;
    std::vector<std::size_t> cuts(count);
    for (auto& c : cuts) c = static_cast<std::size_t>(rng.between(0, static_cast<std::int64_t>(slack)));
    std::sort(cuts.begin(), cuts.end());

    FeatureSequence seq;
    seq.video_id = a.video_id;
    seq.length = length;
    seq.dim = spec.feature_dim;
    seq.calib = calib;
    seq.values.resize(length * spec.feature_dim);
    for (auto& v : seq.values) v = static_cast<float>(rng.normal());

    std::size_t cursor = 0, prev_cut = 0;
    for (std::size_t s = 0; s < count; ++s) {
      cursor += cuts[s] - prev_cut;
      prev_cut = cuts[s];
      const std::size_t first = cursor, last = cursor + extents[s] - 1;
      cursor = last + 2;
      GroundTruthSegment g;
      g.verb = static_cast<std::size_t>(rng.below(spec.num_verbs));
      g.noun = static_cast<std::size_t>(rng.below(spec.num_nouns));
      g.start_sec = std::max(0.0, calib.center_sec(first) - 0.5 * calib.step_sec());
      g.end_sec = std::min(a.duration_sec, calib.center_sec(last) + 0.5 * calib.step_sec());
      a.segments.push_back(g);
      for (std::size_t t = first; t <= last; ++t) {
        float* row = seq.values.data() + t * spec.feature_dim;
        for (std::size_t c = 0; c < block; ++c) {
          row[g.verb * block + c] += static_cast<float>(spec.snr);
          row[(spec.num_verbs + g.noun) * block + c] += static_cast<float>(spec.snr);
        }
      }
    }
    out.annotations.videos.push_back(std::move(a));
    out.features.push_back(std::move(seq));
  }
  return out;
}

void write_synthetic(const SynthOutput& out, const std::string& dir) {
  const auto root = std::filesystem::path(dir);
  for (std::size_t i = 0; i < out.features.size(); ++i) {
    write_features((root / out.annotations.videos[i].feature_file).string(), out.features[i]);
  }
  write_annotations((root / "annotations.json").string(), out.annotations);
}

}  // namespace oadt
