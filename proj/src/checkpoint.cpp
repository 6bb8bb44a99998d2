// Copyright (C) 2026 The OADT Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <algorithm>
#include <map>

#include "oadt/binary_io.hpp"
#include "oadt/model.hpp"

namespace oadt {

namespace {
constexpr char kMagic[] = "OADT";
}  // namespace

Checkpoint make_checkpoint(const OadtModel<float>& model, std::uint64_t step, std::uint64_t seed) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.step = step;
  ckpt.seed = seed;
  for (const auto& p : model.parameters()) {
    const auto data = p.tensor.data();
    ckpt.parameters.push_back({p.path, p.tensor.shape(), std::vector<float>(data.begin(), data.end())});
  }
  return ckpt;
}

// Layout: "OADT" | u16 version | u32 len + config JSON | u64 step | u64 seed |
// u32 count | count x (u32 len + path | u32 rank | rank x u32 | f32 payload).
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  binary::Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.u16(kCheckpointVersion);
  const std::string config = ckpt.config.to_json().dump();
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.bytes(config);
  w.u64(ckpt.step);
  w.u64(ckpt.seed);
  w.u32(static_cast<std::uint32_t>(ckpt.parameters.size()));
  for (const auto& rec : ckpt.parameters) {
    w.u32(static_cast<std::uint32_t>(rec.path.size()));
    w.bytes(rec.path);
    w.u32(static_cast<std::uint32_t>(rec.shape.size()));
    for (std::size_t e : rec.shape) w.u32(static_cast<std::uint32_t>(e));
    for (float v : rec.values) w.f32(v);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
  binary::Reader r(bytes, source);
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) {
    fail(ErrorKind::kBadMagic, source + ": not an OADT checkpoint");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kVersion, source + ": checkpoint version " + std::to_string(version) +
                                  " (supported: " + std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  const std::string config_text = r.bytes(r.u32("config length"), "config");
  try {
    ckpt.config = ModelConfig::from_json(nlohmann::json::parse(config_text));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kParse, source + ": corrupt config block: " + e.what());
  }
  ckpt.step = r.u64("step");
  ckpt.seed = r.u64("seed");
  const std::uint32_t count = r.u32("parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointRecord rec;
    rec.path = r.bytes(r.u32("path length"), "path");
    const std::uint32_t rank = r.u32("rank");
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::size_t extent = r.u32("extent");
      rec.shape.push_back(extent);
      // Checked before multiplying so a hostile shape cannot wrap n.
      if (extent != 0 && n > r.remaining() / 4 / extent) {
        fail(ErrorKind::kTruncated, source + ": truncated payload for " + rec.path);
      }
      n *= extent;
    }
    if (n > r.remaining() / 4) {
      fail(ErrorKind::kTruncated, source + ": truncated payload for " + rec.path);
    }
    rec.values.resize(n);
    for (auto& v : rec.values) v = r.f32("payload");
    ckpt.parameters.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    fail(ErrorKind::kDimension,
         source + ": " + std::to_string(r.remaining()) + " trailing bytes after last record");
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  binary::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return parse_checkpoint(binary::read_file(path), path);
}

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (auto field = ckpt.config.first_difference(expected)) {
    fail(ErrorKind::kConfig, path + ": checkpoint config differs in " + *field);
  }
  return ckpt;
}

void restore_parameters(OadtModel<float>& model, const Checkpoint& ckpt) {
  if (auto field = ckpt.config.first_difference(model.config())) {
    fail(ErrorKind::kConfig, "checkpoint config differs in " + *field);
  }
  std::map<std::string, const CheckpointRecord*> by_path;
  for (const auto& rec : ckpt.parameters) by_path[rec.path] = &rec;
  auto params = model.parameters();
  if (params.size() != by_path.size()) {
    fail(ErrorKind::kConfig, "checkpoint holds " + std::to_string(by_path.size()) +
                                 " parameters, model has " + std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = by_path.find(p.path);
    if (it == by_path.end()) fail(ErrorKind::kConfig, "checkpoint lacks parameter " + p.path);
    if (it->second->shape != p.tensor.shape()) {
      fail(ErrorKind::kConfig, "parameter " + p.path + " has shape " +
                                   shape_str(it->second->shape) + ", model expects " +
                                   shape_str(p.tensor.shape()));
    }
    std::copy(it->second->values.begin(), it->second->values.end(),
              p.tensor.mutable_data().begin());
  }
}

OadtModel<float> model_from_checkpoint(const Checkpoint& ckpt) {
  OadtModel<float> model(ckpt.config, ckpt.seed);
  restore_parameters(model, ckpt);
  return model;
}

}  // namespace oadt
