// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "oadt/config.hpp"

#include <functional>
#include <type_traits>

#include "oadt/binary_io.hpp"

namespace oadt {

using nlohmann::json;

namespace {

template <typename V>
V read_value(const json& value, std::string_view key) {
  auto bad = [&](const char* expected) -> V {
    fail(ErrorKind::kConfig,
         "config key '" + std::string(key) + "' expects " + expected + ", got " + value.dump());
  };
  if constexpr (std::is_same_v<V, std::string>) {
    if (!value.is_string()) return bad("a string");
    return value.get<std::string>();
  } else if constexpr (std::is_same_v<V, double>) {
    if (!value.is_number()) return bad("a number");
    return value.get<double>();
  } else if constexpr (std::is_same_v<V, std::vector<double>>) {
    if (!value.is_array()) return bad("an array of numbers");
    std::vector<double> out;
    for (const auto& x : value) {
      if (!x.is_number()) return bad("an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  } else if constexpr (std::is_signed_v<V>) {
    if (!value.is_number_integer()) return bad("an integer");
    return value.get<V>();
  } else {
    if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
      return bad("a non-negative integer");
    }
    return value.get<V>();
  }
}

struct Field {
  std::string name;
  std::function<void(RunConfig&, const json&, std::string_view)> set;
  std::function<json(const RunConfig&)> get;
};

template <typename Access>
Field plain(std::string name, Access access) {
  using V = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  return {std::move(name),
          [access](RunConfig& c, const json& v, std::string_view key) {
            access(c) = read_value<V>(v, key);
          },
          [access](const RunConfig& c) { return json(access(const_cast<RunConfig&>(c))); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // Model.
    f.push_back(plain("input_dim", [](RunConfig& c) -> auto& { return c.model.input_dim; }));
    f.push_back(plain("input_kernel", [](RunConfig& c) -> auto& { return c.model.input_kernel; }));
    f.push_back(plain("d_model", [](RunConfig& c) -> auto& { return c.model.d_model; }));
    f.push_back(plain("heads", [](RunConfig& c) -> auto& { return c.model.heads; }));
    f.push_back(
        plain("pyramid_levels", [](RunConfig& c) -> auto& { return c.model.pyramid_levels; }));
    f.push_back(plain("stem_layers", [](RunConfig& c) -> auto& { return c.model.stem_layers; }));
    f.push_back(plain("num_verbs", [](RunConfig& c) -> auto& { return c.model.num_verbs; }));
    f.push_back(plain("num_nouns", [](RunConfig& c) -> auto& { return c.model.num_nouns; }));
    f.push_back(plain("head_layers", [](RunConfig& c) -> auto& { return c.model.head_layers; }));
    f.push_back(plain("max_seq_len", [](RunConfig& c) -> auto& { return c.model.max_seq_len; }));
    f.push_back(plain("mlp_ratio", [](RunConfig& c) -> auto& { return c.model.mlp_ratio; }));
    f.push_back(plain("dropout", [](RunConfig& c) -> auto& { return c.model.dropout; }));
    f.push_back(
        plain("cls_prior_prob", [](RunConfig& c) -> auto& { return c.model.cls_prior_prob; }));
    f.push_back(
        plain("offset_scale", [](RunConfig& c) -> auto& { return c.model.offset_scale; }));
    // Training.
    f.push_back(plain("epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }));
    f.push_back(plain("batch_size", [](RunConfig& c) -> auto& { return c.train.batch_size; }));
    f.push_back(plain("base_lr", [](RunConfig& c) -> auto& { return c.train.base_lr; }));
    f.push_back(plain("weight_decay", [](RunConfig& c) -> auto& { return c.train.weight_decay; }));
    f.push_back(plain("beta1", [](RunConfig& c) -> auto& { return c.train.beta1; }));
    f.push_back(plain("beta2", [](RunConfig& c) -> auto& { return c.train.beta2; }));
    f.push_back(plain("adam_eps", [](RunConfig& c) -> auto& { return c.train.adam_eps; }));
    f.push_back(plain("warmup_steps", [](RunConfig& c) -> auto& { return c.train.warmup_steps; }));
    f.push_back(
        plain("warmup_fraction", [](RunConfig& c) -> auto& { return c.train.warmup_fraction; }));
    f.push_back(
        plain("clip_grad_norm", [](RunConfig& c) -> auto& { return c.train.clip_grad_norm; }));
    f.push_back(plain("max_steps", [](RunConfig& c) -> auto& { return c.train.max_steps; }));
    f.push_back(
        plain("focal_alpha", [](RunConfig& c) -> auto& { return c.train.loss.focal.alpha; }));
    f.push_back(
        plain("focal_gamma", [](RunConfig& c) -> auto& { return c.train.loss.focal.gamma; }));
    f.push_back(plain("lambda_reg", [](RunConfig& c) -> auto& { return c.train.loss.lambda_reg; }));
    f.push_back(
        plain("lambda_action", [](RunConfig& c) -> auto& { return c.train.loss.lambda_action; }));
    // Decoding.
    f.push_back(plain("pre_nms_topk", [](RunConfig& c) -> auto& { return c.decode.pre_nms_topk; }));
    f.push_back(
        plain("score_threshold", [](RunConfig& c) -> auto& { return c.decode.score_threshold; }));
    f.push_back({"combination",
                 [](RunConfig& c, const json& v, std::string_view key) {
                   c.decode.combination = parse_combination(read_value<std::string>(v, key));
                 },
                 [](const RunConfig& c) { return json(to_string(c.decode.combination)); }});
    f.push_back(plain("pairs_per_location",
                      [](RunConfig& c) -> auto& { return c.decode.pairs_per_location; }));
    f.push_back({"nms_method",
                 [](RunConfig& c, const json& v, std::string_view key) {
                   c.decode.soft_nms.method = parse_soft_nms_method(read_value<std::string>(v, key));
                 },
                 [](const RunConfig& c) { return json(to_string(c.decode.soft_nms.method)); }});
    f.push_back(plain("nms_sigma", [](RunConfig& c) -> auto& { return c.decode.soft_nms.sigma; }));
    f.push_back(plain("nms_iou_threshold",
                      [](RunConfig& c) -> auto& { return c.decode.soft_nms.iou_threshold; }));
    f.push_back(
        plain("max_detections", [](RunConfig& c) -> auto& { return c.decode.max_detections; }));
    // Evaluation, paths and seed.
    f.push_back(plain("thresholds", [](RunConfig& c) -> auto& { return c.eval.thresholds; }));
    f.push_back(plain("data", [](RunConfig& c) -> auto& { return c.data; }));
    f.push_back(plain("out", [](RunConfig& c) -> auto& { return c.out; }));
    f.push_back(plain("seed", [](RunConfig& c) -> auto& { return c.seed; }));
    return f;
  }();
  return table;
}

}  // namespace

RunConfig::RunConfig() {
  model.input_dim = 0;
  model.num_verbs = 0;
  model.num_nouns = 0;
}

void RunConfig::set(std::string_view key, const json& value) {
  for (const auto& f : fields()) {
    if (f.name == key) {
      f.set(*this, value, key);
      return;
    }
  }
  fail(ErrorKind::kConfig, "unknown config key '" + std::string(key) + "'");
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorKind::kConfig, "override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string_view key = assignment.substr(0, eq);
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set(key, value);
}

json RunConfig::to_json() const {
  json doc = json::object();
  for (const auto& f : fields()) doc[f.name] = f.get(*this);
  return doc;
}

RunConfig RunConfig::from_json(const json& doc) {
  if (!doc.is_object()) fail(ErrorKind::kConfig, "run config must be a flat object");
  RunConfig c;
  for (const auto& [key, value] : doc.items()) c.set(key, value);
  c.train.validate();
  c.decode.validate();
  c.eval.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const auto bytes = binary::read_file(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, path + ": " + e.what());
  }
  try {
    return from_json(doc);
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.name);
    return out;
  }();
  return names;
}

ModelConfig RunConfig::resolved_model(const Dataset& data) const {
  ModelConfig m = model;
  auto fill = [](std::size_t& field, std::size_t from_data, const char* name) {
    if (field == 0) {
      field = from_data;
    } else if (field != from_data) {
      fail(ErrorKind::kDimension, std::string("config ") + name + "=" + std::to_string(field) +
                                      " but the dataset has " + std::to_string(from_data));
    }
  };
  fill(m.input_dim, data.feature_dim, "input_dim");
  fill(m.num_verbs, data.vocabulary.num_verbs, "num_verbs");
  fill(m.num_nouns, data.vocabulary.num_nouns, "num_nouns");
  m.validate();
  return m;
}

TrainConfig RunConfig::resolved_train() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

}  // namespace oadt
