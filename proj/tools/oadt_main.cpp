// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace oadt::cli;

  CLI::App app{"oadt: temporal action detection on clip features"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic dataset");
  synth_cmd->add_option("--spec", synth.spec, "Flat JSON synth spec (built-in defaults if empty)");
  synth_cmd->add_option("--out", synth.out, "Output directory");
  synth_cmd->add_option("--seed", synth.seed, "Overrides the spec seed when >= 0");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoints");
  train_cmd->add_option("--config", train.config, "Flat JSON run config");
  train_cmd->add_option("--data", train.data, "Annotation file of the training set");
  train_cmd->add_option("--out", train.out, "Output directory (default: config 'out', else run)");
  train_cmd->add_option("--seed", train.seed, "Overrides the config seed when >= 0");
  train_cmd->add_option("--set", train.overrides, "Config override key=value, repeatable");
  train_cmd->add_flag("--quiet", train.quiet, "Do not echo the per-step metrics");

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Decode detections with a checkpoint");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "Checkpoint file")->required();
  predict_cmd->add_option("--data", predict.data, "Annotation file naming the videos")->required();
  predict_cmd->add_option("--decode-config", predict.decode_config, "Flat JSON run config");
  predict_cmd->add_option("--out", predict.out, "Prediction file after Soft-NMS");
  predict_cmd->add_option("--candidates", predict.candidates,
                          "Also write the pre-suppression candidates here");
  predict_cmd->add_option("--set", predict.overrides, "Config override key=value, repeatable");

  EnsembleArgs ens;
  auto* ensemble_cmd = app.add_subcommand("ensemble", "Fuse candidate files of several models");
  ensemble_cmd->add_option("--predictions", ens.predictions, "Candidate files, one per model")
      ->required();
  ensemble_cmd->add_option("--weights", ens.weights, "Per-model weights summing to 1 (uniform)");
  ensemble_cmd->add_option("--decode-config", ens.decode_config, "Flat JSON run config");
  ensemble_cmd->add_option("--out", ens.out, "Fused prediction file");
  ensemble_cmd->add_option("--set", ens.overrides, "Config override key=value, repeatable");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Compute verb/noun/action mAP");
  eval_cmd->add_option("--predictions", eval.predictions, "Prediction file")->required();
  eval_cmd->add_option("--annotations", eval.annotations, "Ground-truth annotation file")
      ->required();
  eval_cmd->add_option("--config", eval.config, "Flat JSON run config (thresholds)");
  eval_cmd->add_option("--out", eval.out, "Directory for report.txt and report.json");
  eval_cmd->add_option("--set", eval.overrides, "Config override key=value, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*synth_cmd) run_synth(synth, std::cout);
    if (*train_cmd) run_train(train, std::cout);
    if (*predict_cmd) run_predict(predict, std::cout);
    if (*ensemble_cmd) run_ensemble(ens, std::cout);
    if (*eval_cmd) run_eval(eval, std::cout);
  } catch (const oadt::Error& e) {
    std::cerr << "oadt " << name << ": " << oadt::to_string(e.kind()) << " error: " << e.what()
              << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "oadt " << name << ": error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
