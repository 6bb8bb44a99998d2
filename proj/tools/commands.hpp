// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "oadt/error.hpp"

namespace oadt::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitMissingFile = 3,
  kExitParse = 4,
  kExitValidation = 5,
};

int exit_code_for(ErrorKind kind);

struct SynthArgs {
  std::string spec;
  std::string out = "synth";
  std::int64_t seed = -1;  // negative keeps the spec's seed
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::int64_t seed = -1;
  std::vector<std::string> overrides;
  bool quiet = false;
};

struct PredictArgs {
  std::string checkpoint;
  std::string data;
  std::string decode_config;
  std::string out = "predictions.json";
  std::string candidates;
  std::vector<std::string> overrides;
};

struct EnsembleArgs {
  std::vector<std::string> predictions;
  std::vector<double> weights;
  std::string decode_config;
  std::string out = "ensemble.json";
  std::vector<std::string> overrides;
};

struct EvalArgs {
  std::string predictions;
  std::string annotations;
  std::string config;
  std::string out = "report";
  std::vector<std::string> overrides;
};

void run_synth(const SynthArgs& args, std::ostream& log);
void run_train(const TrainArgs& args, std::ostream& log);
void run_predict(const PredictArgs& args, std::ostream& log);
void run_ensemble(const EnsembleArgs& args, std::ostream& log);
void run_eval(const EvalArgs& args, std::ostream& log);

}  // namespace oadt::cli
