// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "commands.hpp"

#include <filesystem>
#include <ostream>

#include <nlohmann/json.hpp>

#include "oadt/binary_io.hpp"
#include "oadt/config.hpp"
#include "oadt/dataset.hpp"
#include "oadt/evaluator.hpp"
#include "oadt/pipeline.hpp"
#include "oadt/postprocess.hpp"
#include "oadt/trainer.hpp"

namespace oadt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
      return kExitMissingFile;
    case ErrorKind::kParse:
    case ErrorKind::kBadMagic:
    case ErrorKind::kVersion:
    case ErrorKind::kTruncated:
      return kExitParse;
    case ErrorKind::kValidation:
    case ErrorKind::kConfig:
    case ErrorKind::kDimension:
    case ErrorKind::kEmpty:
      return kExitValidation;
    default:
      return kExitFailure;
  }
}

namespace {

json read_json_file(const std::string& path) {
  const auto bytes = binary::read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, path + ": " + e.what());
  }
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config = path.empty() ? RunConfig{} : RunConfig::load(path);
  for (const auto& o : overrides) config.apply_override(o);
  config.train.validate();
  config.decode.validate();
  config.eval.validate();
  return config;
}

}  // namespace

void run_synth(const SynthArgs& args, std::ostream& log) {
  SynthSpec spec = args.spec.empty() ? SynthSpec{} : SynthSpec::from_json(read_json_file(args.spec));
  if (args.seed >= 0) spec.seed = static_cast<std::uint64_t>(args.seed);
  const SynthOutput out = synthesize(spec);
  write_synthetic(out, args.out);
  log << "wrote " << out.annotations.videos.size() << " videos to "
      << (fs::path(args.out) / "annotations.json").string() << "\n";
}

void run_train(const TrainArgs& args, std::ostream& log) {
  RunConfig config = load_run_config(args.config, args.overrides);
  if (!args.data.empty()) config.data = args.data;
  if (!args.out.empty()) config.out = args.out;
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (config.data.empty()) fail(ErrorKind::kConfig, "train needs --data or a 'data' config key");
  if (config.out.empty()) config.out = "run";

  const Dataset data = load_dataset(config.data);
  const ModelConfig model = config.resolved_model(data);
  TrainLogger logger;
  if (!args.quiet) {
    logger = [&log](const StepMetrics& m) { log << format_metrics_line(m) << "\n"; };
  }
  const TrainResult result = train(data, model, config.resolved_train(), logger);
  write_train_outputs(result, config.out);
  binary::write_text((fs::path(config.out) / "config.json").string(),
                     config.to_json().dump(2) + "\n");
  log << "trained " << result.steps.size() << " steps; checkpoints in " << config.out << "\n";
}

void run_predict(const PredictArgs& args, std::ostream& log) {
  const RunConfig config = load_run_config(args.decode_config, args.overrides);
  const Checkpoint ckpt = load_checkpoint(args.checkpoint);
  const Dataset data = load_dataset(args.data);
  if (data.feature_dim != ckpt.config.input_dim) {
    fail(ErrorKind::kDimension, args.data + ": feature dim " + std::to_string(data.feature_dim) +
                                    " but the checkpoint expects " +
                                    std::to_string(ckpt.config.input_dim));
  }
  const OadtModel<float> model = model_from_checkpoint(ckpt);
  const Predictions preds = predict_dataset(model, data, config.decode);
  write_predictions(args.out, preds.detections);
  if (!args.candidates.empty()) write_predictions(args.candidates, preds.candidates);
  std::size_t n = 0;
  for (const auto& [video, dets] : preds.detections) n += dets.size();
  log << "wrote " << n << " detections for " << preds.detections.size() << " videos to "
      << args.out << "\n";
}

void run_ensemble(const EnsembleArgs& args, std::ostream& log) {
  const RunConfig config = load_run_config(args.decode_config, args.overrides);
  std::vector<PredictionSet> inputs;
  for (const auto& path : args.predictions) inputs.push_back(read_predictions(path));
  const PredictionSet fused = ensemble(inputs, args.weights, config.decode);
  write_predictions(args.out, fused);
  log << "fused " << inputs.size() << " models into " << args.out << "\n";
}

void run_eval(const EvalArgs& args, std::ostream& log) {
  const RunConfig config = load_run_config(args.config, args.overrides);
  const EvalReport report = evaluate_files(args.predictions, args.annotations, config.eval);
  const std::string table = render_report(report);
  binary::write_text((fs::path(args.out) / "report.txt").string(), table);
  binary::write_text((fs::path(args.out) / "report.json").string(),
                     report.to_json().dump(2) + "\n");
  log << table;
}

}  // namespace oadt::cli
