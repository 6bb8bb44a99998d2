// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

// Low-level extension module. Structured values cross the boundary as JSON
// text; the `oadt` package decodes them into dicts and lists.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "oadt/config.hpp"
#include "oadt/dataset.hpp"
#include "oadt/evaluator.hpp"
#include "oadt/model.hpp"
#include "oadt/pipeline.hpp"
#include "oadt/postprocess.hpp"
#include "oadt/segment.hpp"
#include "oadt/trainer.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

oadt::PredictionSet predictions_from_text(const std::string& text) {
  return oadt::predictions_from_json(json::parse(text), "<python>");
}

void synthesize_to(const std::string& out_dir, const std::string& spec_json) {
  const oadt::SynthSpec spec = oadt::SynthSpec::from_json(json::parse(spec_json));
  oadt::write_synthetic(oadt::synthesize(spec), out_dir);
}

py::array_t<float> read_features(const std::string& path) {
  const oadt::FeatureSequence seq = oadt::read_features(path);
  py::array_t<float> out({seq.length, seq.dim});
  std::copy(seq.values.begin(), seq.values.end(), out.mutable_data());
  return out;
}

void write_features(const std::string& path, const std::string& video_id,
                    py::array_t<float, py::array::c_style | py::array::forcecast> values) {
  if (values.ndim() != 2) {
    oadt::fail(oadt::ErrorKind::kDimension, "features must be a 2-D [T, D] array");
  }
  oadt::FeatureSequence seq;
  seq.video_id = video_id;
  seq.length = static_cast<std::size_t>(values.shape(0));
  seq.dim = static_cast<std::size_t>(values.shape(1));
  seq.values.assign(values.data(), values.data() + values.size());
  oadt::write_features(path, seq);
}

// Returns the per-step metric lines.
std::vector<std::string> train_run(const std::string& annotations, const std::string& out_dir,
                                   const std::string& config_json) {
  oadt::RunConfig config = oadt::RunConfig::from_json(json::parse(config_json));
  const oadt::Dataset data = oadt::load_dataset(annotations);
  py::gil_scoped_release release;
  const oadt::TrainResult result =
      oadt::train(data, config.resolved_model(data), config.resolved_train());
  oadt::write_train_outputs(result, out_dir);
  std::vector<std::string> lines;
  for (const auto& m : result.steps) lines.push_back(oadt::format_metrics_line(m));
  return lines;
}

// Returns (detections, candidates) as prediction-file JSON text.
std::pair<std::string, std::string> predict_run(const std::string& checkpoint,
                                                const std::string& annotations,
                                                const std::string& config_json) {
  const oadt::RunConfig config = oadt::RunConfig::from_json(json::parse(config_json));
  const oadt::OadtModel<float> model =
      oadt::model_from_checkpoint(oadt::load_checkpoint(checkpoint));
  const oadt::Dataset data = oadt::load_dataset(annotations);
  py::gil_scoped_release release;
  const oadt::Predictions p = oadt::predict_dataset(model, data, config.decode);
  return {oadt::predictions_to_json(p.detections).dump(),
          oadt::predictions_to_json(p.candidates).dump()};
}

std::string soft_nms_text(const std::string& predictions, const std::string& config_json) {
  const oadt::RunConfig config = oadt::RunConfig::from_json(json::parse(config_json));
  oadt::PredictionSet set = predictions_from_text(predictions);
  for (auto& [video, dets] : set) {
    dets = oadt::soft_nms(std::move(dets), config.decode);
  }
  return oadt::predictions_to_json(set).dump();
}

std::string ensemble_text(const std::vector<std::string>& predictions,
                          const std::vector<double>& weights, const std::string& config_json) {
  const oadt::RunConfig config = oadt::RunConfig::from_json(json::parse(config_json));
  std::vector<oadt::PredictionSet> sets;
  for (const auto& p : predictions) sets.push_back(predictions_from_text(p));
  return oadt::predictions_to_json(oadt::ensemble(sets, weights, config.decode)).dump();
}

std::pair<std::string, std::string> evaluate_text(const std::string& predictions,
                                                  const std::string& annotations_path,
                                                  const std::vector<double>& thresholds) {
  oadt::EvalConfig cfg;
  if (!thresholds.empty()) cfg.thresholds = thresholds;
  const oadt::EvalReport report = oadt::evaluate(
      predictions_from_text(predictions), oadt::read_annotations(annotations_path), cfg);
  return {report.to_json().dump(), oadt::render_report(report)};
}

std::optional<double> match_and_ap(
    const std::vector<std::tuple<std::string, double, double, double>>& predictions,
    const std::vector<std::tuple<std::string, double, double>>& ground_truth, double threshold) {
  std::vector<oadt::ScoredInterval> p;
  for (const auto& [v, s, e, score] : predictions) p.push_back({v, s, e, score});
  std::vector<oadt::Interval> g;
  for (const auto& [v, s, e] : ground_truth) g.push_back({v, s, e});
  return oadt::match_and_ap(p, g, threshold);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the oadt temporal action detector";

  static py::exception<oadt::Error> error(m, "OadtError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const oadt::Error& e) {
      py::object err = error;
      py::object instance = err(e.what());
      instance.attr("kind") = oadt::to_string(e.kind());
      PyErr_SetObject(error.ptr(), instance.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("iou1d", &oadt::iou1d, py::arg("a_start"), py::arg("a_end"), py::arg("b_start"),
        py::arg("b_end"));
  m.def("quantize_score", &oadt::quantize_score, py::arg("score"));
  m.def("cosine_lr", &oadt::cosine_lr, py::arg("step"), py::arg("total_steps"),
        py::arg("base_lr"), py::arg("warmup_steps"));
  m.def("default_config", [] { return oadt::RunConfig{}.to_json().dump(); });
  m.def("default_synth_spec", [] { return oadt::SynthSpec{}.to_json().dump(); });
  m.def("synthesize", &synthesize_to, py::arg("out_dir"), py::arg("spec_json"));
  m.def("read_features", &read_features, py::arg("path"));
  m.def("write_features", &write_features, py::arg("path"), py::arg("video_id"),
        py::arg("values"));
  m.def(
      "read_annotations",
      [](const std::string& path) {
        return oadt::annotations_to_json(oadt::read_annotations(path)).dump();
      },
      py::arg("path"));
  m.def("train", &train_run, py::arg("annotations"), py::arg("out_dir"), py::arg("config_json"));
  m.def("predict", &predict_run, py::arg("checkpoint"), py::arg("annotations"),
        py::arg("config_json"));
  m.def("soft_nms", &soft_nms_text, py::arg("predictions_json"), py::arg("config_json"));
  m.def("ensemble", &ensemble_text, py::arg("predictions_json"), py::arg("weights"),
        py::arg("config_json"));
  m.def("evaluate", &evaluate_text, py::arg("predictions_json"), py::arg("annotations_path"),
        py::arg("thresholds"));
  m.def("match_and_ap", &match_and_ap, py::arg("predictions"), py::arg("ground_truth"),
        py::arg("threshold"));
}
