// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "oadt/dataset.hpp"
#include "oadt/evaluator.hpp"
#include "oadt/model.hpp"
#include "oadt/postprocess.hpp"
#include "oadt/trainer.hpp"

namespace oadt {

/// Every tunable of a run in one flat key/value document. Model fields
/// input_dim, num_verbs and num_nouns default to 0, meaning "take them from
/// the dataset".
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  EvalConfig eval;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;

  RunConfig();

  // Single key assignment; unknown keys and ill-typed values are kConfig
  // errors naming the key.
  void set(std::string_view key, const nlohmann::json& value);
  // "key=value" with value read as JSON, or as a bare string when it is not.
  void apply_override(std::string_view assignment);

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::string& path);

  static const std::vector<std::string>& keys();

  // Model config with dataset-derived fields filled in, validated.
  ModelConfig resolved_model(const Dataset& data) const;
  // Train config carrying the run seed.
  TrainConfig resolved_train() const;
};

}  // namespace oadt
