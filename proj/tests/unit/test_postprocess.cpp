// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "generators.hpp"
#include "oracles.hpp"
#include "oadt/binary_io.hpp"
#include "oadt/postprocess.hpp"

using namespace oadt;
using oadt::testing::for_all;
using oadt::testing::oracle_soft_nms;
using oadt::testing::random_detection;
using oadt::testing::same_ranking;
using TD = Tensor<double>;

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

Detection det(double start, double end, std::size_t action, double score,
              const std::string& video = "v") {
  return Detection{video, start, end, action, 0, action, score};
}

DecodeConfig nms_config(SoftNmsMethod method, double sigma = 0.5, double thr = 0.5) {
  DecodeConfig c;
  c.soft_nms = {method, sigma, thr};
  c.score_threshold = 1e-9;
  c.max_detections = 1000;
  return c;
}

// Candidates with distinct (segment, class) keys.
std::vector<Detection> random_pool(Rng& rng, std::size_t max_n, std::size_t classes) {
  std::vector<Detection> pool;
  const std::size_t n = 1 + rng.below(max_n);
  while (pool.size() < n) {
    Detection d = random_detection(rng, "v", 10.0, classes, 1);
    d.score = quantize_score(rng.uniform(0.01, 1.0));
    const bool dup = std::any_of(pool.begin(), pool.end(), [&](const Detection& o) {
      return o.start_sec == d.start_sec && o.end_sec == d.end_sec && o.action == d.action;
    });
    if (!dup) pool.push_back(d);
  }
  return pool;
}

PyramidOutputs<double> single_level(std::size_t length, std::size_t stride,
                                    std::vector<double> verb, std::vector<double> noun,
                                    std::vector<double> offsets) {
  PyramidOutputs<double> out;
  PyramidLevel<double> l;
  const std::size_t nv = verb.size() / length, nc = noun.size() / length;
  l.verb_logits = TD({1, length, nv}, std::move(verb));
  l.noun_logits = TD({1, length, nc}, std::move(noun));
  l.offsets = TD({1, length, 2}, std::move(offsets));
  l.stride = stride;
  l.mask = nn::PaddingMask::all_valid(1, length);
  out.levels.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("score combination examples") {
  CHECK(combine_scores(0.9, 0.8, Combination::kMultiply) == doctest::Approx(0.72));
  CHECK(combine_scores(0.9, 0.8, Combination::kAdd) == doctest::Approx(0.85));
  CHECK(parse_combination("add") == Combination::kAdd);
  CHECK(to_string(Combination::kMultiply) == "multiply");
  CHECK(parse_soft_nms_method(to_string(SoftNmsMethod::kLinear)) == SoftNmsMethod::kLinear);
  CHECK_THROWS_AS(parse_combination("max"), Error);
  CHECK(quantize_score(0.1234567) == 0.123457);
  CHECK(quantize_score(1e-9) == 1e-6);
}

TEST_CASE("decode: verb [0.9, 0.1] x noun [0.2, 0.8] picks (v0, n1)") {
  const auto out = single_level(1, 1, {logit(0.9), logit(0.1)}, {logit(0.2), logit(0.8)},
                                {1.0, 1.0});
  const TimeCalibration calib{16.0, 16, 16, 10.0};
  DecodeConfig cfg;
  cfg.pairs_per_location = 1;
  auto dets = decode(out, 0, "v", calib, cfg);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].verb == 0);
  CHECK(dets[0].noun == 1);
  CHECK(dets[0].action == 1);
  CHECK(dets[0].score == doctest::Approx(0.72).epsilon(1e-9));
  cfg.combination = Combination::kAdd;
  dets = decode(out, 0, "v", calib, cfg);
  REQUIRE(dets.size() == 1);
  CHECK(dets[0].score == doctest::Approx(0.85).epsilon(1e-9));
}

TEST_CASE("decode: a hand-built location maps to [center - ds*2^l*step, center + de*2^l*step]") {
  // Level 1 of a 6-cell level: index 2 pools base features 4 and 5.
  const TimeCalibration calib{30.0, 32, 16, 100.0};
  std::vector<double> verb(6, -20.0), noun(6, -20.0), offsets(12, 0.5);
  verb[2] = 3.0;
  noun[2] = 2.0;
  offsets[4] = 1.25;
  offsets[5] = 2.5;
  auto out = single_level(12, 1, std::vector<double>(12, -20.0), std::vector<double>(12, -20.0),
                          std::vector<double>(24, 1.0));
  out.levels.push_back(single_level(6, 2, verb, noun, offsets).levels[0]);
  DecodeConfig cfg;
  cfg.score_threshold = 0.5;
  const auto dets = decode(out, 0, "v", calib, cfg);
  REQUIRE(dets.size() == 1);
  const double step = 16.0 / 30.0;
  const double center = 0.5 * ((4 * 16 + 16) / 30.0 + (5 * 16 + 16) / 30.0);
  CHECK(dets[0].start_sec == doctest::Approx(center - 1.25 * 2 * step).epsilon(1e-12));
  CHECK(dets[0].end_sec == doctest::Approx(center + 2.5 * 2 * step).epsilon(1e-12));
}

TEST_CASE("decode: clipping, masking and the top-k cap") {
  const TimeCalibration calib{16.0, 16, 16, 3.0};
  auto out = single_level(3, 1, {2.0, 2.0, 2.0}, {2.0, 2.0, 2.0},
                          {5.0, 0.5, 0.25, 0.25, 0.5, 5.0});
  out.levels[0].mask = nn::PaddingMask(1, 3, {1, 1, 0});
  DecodeConfig cfg;
  auto dets = decode(out, 0, "v", calib, cfg);
  REQUIRE(dets.size() == 2);
  for (const auto& d : dets) {
    CHECK(d.start_sec >= 0.0);
    CHECK(d.end_sec <= 3.0);
  }
  CHECK(std::any_of(dets.begin(), dets.end(), [](const Detection& d) { return d.start_sec == 0.0; }));
  cfg.pre_nms_topk = 1;
  CHECK(decode(out, 0, "v", calib, cfg).size() == 1);
  cfg.score_threshold = 0.9;
  cfg.pre_nms_topk = 10;
  CHECK(decode(out, 0, "v", calib, cfg).empty());
}

TEST_CASE("decode: with multiplication the best pair is (argmax verb, argmax noun)") {
  for_all(51, 200, [](Rng& rng, std::size_t) {
    const std::size_t nv = 1 + rng.below(5), nc = 1 + rng.below(5);
    std::vector<double> v(nv), n(nc);
    for (auto& x : v) x = rng.uniform(-4.0, 4.0);
    for (auto& x : n) x = rng.uniform(-4.0, 4.0);
    const auto out = single_level(1, 1, v, n, {1.0, 1.0});
    DecodeConfig cfg;
    cfg.pairs_per_location = 1 + rng.below(4);
    cfg.score_threshold = 0.0;
    const auto dets = decode(out, 0, "v", TimeCalibration{16.0, 16, 16, 10.0}, cfg);
    REQUIRE(!dets.empty());
    CHECK(dets.size() == std::min(cfg.pairs_per_location, nv * nc));
    const auto bv = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
    const auto bn = static_cast<std::size_t>(std::max_element(n.begin(), n.end()) - n.begin());
    CHECK(dets[0].verb == bv);
    CHECK(dets[0].noun == bn);
  });
}

TEST_CASE("soft_nms: two identical segments at sigma 0.5 leave 0.8 * e^-2") {
  const auto out = soft_nms({det(1.0, 3.0, 0, 0.9), det(1.0, 3.0, 0, 0.8)},
                            nms_config(SoftNmsMethod::kGaussian));
  REQUIRE(out.size() == 2);
  CHECK(out[0].score == 0.9);
  CHECK(std::abs(out[1].score - 0.108268) < 1e-6);
}

TEST_CASE("soft_nms: no overlap leaves scores and order unchanged") {
  const std::vector<Detection> in{det(0, 1, 0, 0.9), det(1, 2, 0, 0.7), det(3, 4, 0, 0.5),
                                   det(0, 1, 1, 0.3)};
  CHECK(soft_nms(in, nms_config(SoftNmsMethod::kGaussian)) == in);
  CHECK(soft_nms(in, nms_config(SoftNmsMethod::kLinear)) == in);
}

TEST_CASE("soft_nms: sigma 1e6 applies essentially no decay") {
  const std::vector<Detection> in{det(0, 4, 0, 0.9), det(1, 4, 0, 0.7), det(0, 3, 0, 0.5)};
  const auto out = soft_nms(in, nms_config(SoftNmsMethod::kGaussian, 1e6));
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i].start_sec == in[i].start_sec);
    CHECK(std::abs(out[i].score - in[i].score) / in[i].score < 1e-6);
  }
}

TEST_CASE("soft_nms: linear decay only above the threshold; suppression stays in-class") {
  const auto out = soft_nms({det(0, 4, 0, 0.9), det(0, 3, 0, 0.8), det(0, 1, 0, 0.7),
                             det(0, 4, 1, 0.6)},
                            nms_config(SoftNmsMethod::kLinear, 0.5, 0.5));
  REQUIRE(out.size() == 4);
  CHECK(out[0].score == 0.9);
  CHECK(out[1].score == 0.7);  // IoU 0.25 with the best: untouched
  CHECK(out[2].score == 0.6);  // other class: untouched
  CHECK(out[3].score == doctest::Approx(0.8 * 0.25));
}

TEST_CASE("soft_nms: random-input properties") {
  for_all(52, 400, [](Rng& rng, std::size_t) {
    const auto in = random_pool(rng, 12, 3);
    const auto method = rng.below(2) ? SoftNmsMethod::kGaussian : SoftNmsMethod::kLinear;
    DecodeConfig cfg = nms_config(method, rng.uniform(0.1, 2.0), rng.uniform(0.0, 1.0));
    cfg.score_threshold = rng.below(2) ? 1e-9 : 0.05;
    const auto out = soft_nms(in, cfg);

    // Subset by identity, scores never increase.
    std::vector<bool> used(in.size(), false);
    for (const auto& d : out) {
      bool found = false;
      for (std::size_t i = 0; i < in.size() && !found; ++i) {
        const auto& s = in[i];
        if (!used[i] && s.start_sec == d.start_sec && s.end_sec == d.end_sec &&
            s.action == d.action && d.score <= s.score) {
          used[i] = found = true;
        }
      }
      CHECK(found);
    }
    CHECK(std::is_sorted(out.begin(), out.end(), detection_before));
    // Top-1 per class survives untouched and ranks first within its class.
    for (std::size_t a = 0; a < 3; ++a) {
      const Detection* top = nullptr;
      for (const auto& d : in) {
        if (d.action == a && (!top || detection_before(d, *top))) top = &d;
      }
      if (!top || top->score < cfg.score_threshold) continue;
      const auto first = std::find_if(out.begin(), out.end(),
                                      [&](const Detection& d) { return d.action == a; });
      REQUIRE(first != out.end());
      CHECK(*first == *top);
    }
    // Order independence.
    auto shuffled = in;
    rng.shuffle(std::span<Detection>(shuffled));
    CHECK(soft_nms(shuffled, cfg) == out);
    // Independent oracle.
    CHECK(same_ranking(oracle_soft_nms(in, cfg), out));
  });
}

TEST_CASE("soft_nms: max_detections caps the output") {
  std::vector<Detection> in;
  for (int i = 0; i < 10; ++i) in.push_back(det(i, i + 1, 0, 0.1 * (i + 1)));
  DecodeConfig cfg = nms_config(SoftNmsMethod::kGaussian);
  cfg.max_detections = 4;
  const auto out = soft_nms(in, cfg);
  REQUIRE(out.size() == 4);
  CHECK(out[0].score == doctest::Approx(1.0));
  CHECK(out[3].score == doctest::Approx(0.7));
}

TEST_CASE("ensemble: single model with weight 1 equals its own soft_nms") {
  for_all(53, 50, [](Rng& rng, std::size_t) {
    PredictionSet cands{{"v", random_pool(rng, 10, 2)}};
    const DecodeConfig cfg = nms_config(SoftNmsMethod::kGaussian);
    const std::vector<double> w{1.0};
    const auto fused = ensemble(std::span(&cands, 1), w, cfg);
    auto expect = soft_nms(cands["v"], cfg);
    for (auto& d : expect) d.score = quantize_score(d.score);
    CHECK(fused.at("v") == expect);
  });
}

TEST_CASE("ensemble: two identical models rank like one") {
  for_all(54, 50, [](Rng& rng, std::size_t) {
    const PredictionSet one{{"v", random_pool(rng, 10, 2)}};
    const std::vector<PredictionSet> two{one, one};
    const DecodeConfig cfg = nms_config(SoftNmsMethod::kGaussian);
    const auto single = ensemble(std::span(&one, 1), {}, cfg);
    const auto fused = ensemble(two, {}, cfg);
    CHECK(fused == single);
  });
}

TEST_CASE("ensemble: disjoint candidates match soft_nms over the weighted union") {
  for_all(55, 100, [](Rng& rng, std::size_t) {
    PredictionSet a{{"v", random_pool(rng, 3, 2)}};
    PredictionSet b{{"v", {}}};
    for (auto d : random_pool(rng, 3, 2)) {
      d.start_sec += 0.25;  // off the shared grid, so no exact duplicates
      b["v"].push_back(d);
    }
    const double wa = 0.25 + 0.5 * rng.uniform();
    const std::vector<double> w{wa, 1.0 - wa};
    const DecodeConfig cfg = nms_config(SoftNmsMethod::kGaussian);
    std::vector<Detection> uni;
    for (auto d : a["v"]) {
      d.score *= w[0];
      uni.push_back(d);
    }
    for (auto d : b["v"]) {
      d.score *= w[1];
      uni.push_back(d);
    }
    auto expect = oracle_soft_nms(uni, cfg);
    for (auto& d : expect) d.score = quantize_score(d.score);
    const std::vector<PredictionSet> both{a, b};
    CHECK(same_ranking(ensemble(both, w, cfg).at("v"), expect));
  });
}

TEST_CASE("ensemble: duplicates merge by summing weighted scores") {
  const PredictionSet a{{"v", {det(0, 1, 0, 0.6)}}}, b{{"v", {det(0, 1, 0, 0.8)}}};
  const std::vector<PredictionSet> both{a, b};
  const auto fused = ensemble(both, std::vector<double>{0.5, 0.5}, nms_config(SoftNmsMethod::kGaussian));
  REQUIRE(fused.at("v").size() == 1);
  CHECK(fused.at("v")[0].score == doctest::Approx(0.7));
}

TEST_CASE("ensemble: invalid inputs") {
  const DecodeConfig cfg;
  const PredictionSet a{{"v", {det(0, 1, 0, 0.5)}}};
  const std::vector<PredictionSet> two{a, a};
  CHECK_THROWS_AS(ensemble(std::span<const PredictionSet>{}, {}, cfg), Error);
  CHECK_THROWS_AS(ensemble(two, std::vector<double>{1.0}, cfg), Error);
  CHECK_THROWS_AS(ensemble(two, std::vector<double>{0.7, 0.7}, cfg), Error);
  CHECK_THROWS_AS(ensemble(two, std::vector<double>{1.5, -0.5}, cfg), Error);
}

TEST_CASE("prediction files: sorted, 6-decimal scores, round-trip, errors") {
  PredictionSet set{{"b", {det(0, 1, 2, 0.3), det(2, 5, 1, 0.91234567, "b")}},
                    {"a", {det(1, 2, 0, 0.5, "a")}}};
  set["b"][0].video_id = "b";
  const auto doc = predictions_to_json(set);
  CHECK(doc["b"][0]["score"] == 0.912346);
  CHECK(doc["b"][1]["score"] == 0.3);
  const auto dir = std::filesystem::temp_directory_path() / "oadt_test_predictions";
  std::filesystem::remove_all(dir);
  const std::string path = (dir / "p.json").string();
  write_predictions(path, set);
  const PredictionSet back = read_predictions(path);
  REQUIRE(back.at("b").size() == 2);
  CHECK(back.at("b")[0].score == 0.912346);
  CHECK(back.at("b")[0].video_id == "b");
  const std::string path2 = (dir / "q.json").string();
  write_predictions(path2, back);
  CHECK(binary::read_file(path) == binary::read_file(path2));

  auto kind = [](const nlohmann::json& j) {
    try {
      (void)predictions_from_json(j, "mem");
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kContract;
  };
  using nlohmann::json;
  const json good = {{"start_sec", 0.0}, {"end_sec", 1.0}, {"verb", 0u},
                     {"noun", 0u},       {"action", 0u},    {"score", 0.5}};
  CHECK(kind(json::array()) == ErrorKind::kParse);
  CHECK(kind({{"v", 3}}) == ErrorKind::kParse);
  json missing = good;
  missing.erase("score");
  CHECK(kind({{"v", json::array({missing})}}) == ErrorKind::kParse);
  json neg = good;
  neg["verb"] = -1;
  CHECK(kind({{"v", json::array({neg})}}) == ErrorKind::kParse);
  json flipped = good;
  flipped["start_sec"] = 2.0;
  CHECK(kind({{"v", json::array({flipped})}}) == ErrorKind::kValidation);
  json big = good;
  big["score"] = 1.5;
  CHECK(kind({{"v", json::array({big})}}) == ErrorKind::kValidation);
  binary::write_text((dir / "bad.json").string(), "{\"v\": [");
  CHECK_THROWS_AS(read_predictions((dir / "bad.json").string()), Error);
}
