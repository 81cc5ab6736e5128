// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pct/model.hpp"
#include "pct/shapes.hpp"

namespace pct {

/// Everything a CLI run needs. JSON keys match the member names.
struct RunConfig {
  std::string model = "pct";
  std::string task = "classify";
  std::string widths = "desk";  // desk | paper
  std::string data;             // manifest path or dataset directory
  std::string out = "run";
  std::uint64_t seed = 1;
  std::size_t batch = 16;
  std::size_t epochs = 100;
  double lr = 0.01;
  double lr_min = 0.0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double label_smoothing = 0.2;
  std::size_t points = 256;
  std::size_t k = 0;  // 0: preset neighborhood size
  bool augment = true;
  bool unsigned_normals = false;
  bool deterministic = false;
  int threads = 0;  // 0: PCT_THREADS or the library default

  // Dataset generation.
  std::vector<std::string> classes = {"sphere", "cube", "cylinder", "cone", "torus", "plane", "pyramid", "helix"};
  std::size_t per_class = 50;
  double noise = 0.0;
  double train_fraction = 0.8;

  // Filled in by `train` from the data.
  std::size_t n_outputs = 0;
  std::size_t n_categories = 0;

  void validate() const {
    auto bad = [](const std::string& key, const std::string& why) { throw ValidationError("config '" + key + "': " + why); };
    try {
      parse_variant(model);
    } catch (const Error& e) {
      bad("model", e.what());
    }
    try {
      parse_task(task);
    } catch (const Error& e) {
      bad("task", e.what());
    }
    if (widths != "desk" && widths != "paper") bad("widths", "must be desk or paper");
    if (batch < 2) bad("batch", "must be at least 2");
    if (!(lr > 0.0)) bad("lr", "must be positive");
    if (lr_min < 0.0 || lr_min > lr) bad("lr_min", "must lie in [0, lr]");
    if (momentum < 0.0 || momentum >= 1.0) bad("momentum", "must lie in [0, 1)");
    if (weight_decay < 0.0) bad("weight_decay", "must be non-negative");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) bad("label_smoothing", "must lie in [0, 1)");
    if (points < 8) bad("points", "must be at least 8");
    if (threads < 0) bad("threads", "must be non-negative");
    if (classes.empty()) bad("classes", "must not be empty");
    for (const auto& c : classes) {
      try {
        parse_shape_kind(c);
      } catch (const Error& e) {
        bad("classes", e.what());
      }
    }
    if (per_class < 2) bad("per_class", "must be at least 2");
    if (noise < 0.0) bad("noise", "must be non-negative");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) bad("train_fraction", "must lie in (0, 1)");
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = c.model;
  j["task"] = c.task;
  j["widths"] = c.widths;
  j["data"] = c.data;
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["batch"] = c.batch;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["lr_min"] = c.lr_min;
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["label_smoothing"] = c.label_smoothing;
  j["points"] = c.points;
  j["k"] = c.k;
  j["augment"] = c.augment;
  j["unsigned_normals"] = c.unsigned_normals;
  j["deterministic"] = c.deterministic;
  j["threads"] = c.threads;
  j["classes"] = c.classes;
  j["per_class"] = c.per_class;
  j["noise"] = c.noise;
  j["train_fraction"] = c.train_fraction;
  j["n_outputs"] = c.n_outputs;
  j["n_categories"] = c.n_categories;
  return j;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys and wrong types
/// raise ValidationError naming the key.
inline RunConfig from_json(const nlohmann::json& j, RunConfig base = {}) {
  if (!j.is_object()) throw ValidationError("config: top level must be a JSON object");
  const std::set<std::string> known = [] {
    std::set<std::string> s;
    const auto defaults = to_json(RunConfig{});
    for (const auto& [k, v] : defaults.items()) s.insert(k);
    return s;
  }();
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("config '" + key + "': unknown key");
    try {
#define PCT_FIELD(name) \
  if (key == #name) value.get_to(base.name)
      PCT_FIELD(model);
      PCT_FIELD(task);
      PCT_FIELD(widths);
      PCT_FIELD(data);
      PCT_FIELD(out);
      PCT_FIELD(seed);
      PCT_FIELD(batch);
      PCT_FIELD(epochs);
      PCT_FIELD(lr);
      PCT_FIELD(lr_min);
      PCT_FIELD(momentum);
      PCT_FIELD(weight_decay);
      PCT_FIELD(label_smoothing);
      PCT_FIELD(points);
      PCT_FIELD(k);
      PCT_FIELD(augment);
      PCT_FIELD(unsigned_normals);
      PCT_FIELD(deterministic);
      PCT_FIELD(threads);
      PCT_FIELD(classes);
      PCT_FIELD(per_class);
      PCT_FIELD(noise);
      PCT_FIELD(train_fraction);
      PCT_FIELD(n_outputs);
      PCT_FIELD(n_categories);
#undef PCT_FIELD
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config '" + key + "': " + e.what());
    }
  }
  return base;
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config " + path);
  try {
    return from_json(nlohmann::json::parse(is), std::move(base));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config " + path + ": " + e.what());
  }
}

inline void save_run_config(const RunConfig& c, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot write " + path);
  os << to_json(c).dump(2) << '\n';
}

/// Model configuration for a run: width preset, point count, k override,
/// output and category counts.
inline ModelConfig model_config(const RunConfig& c) {
  const Variant v = parse_variant(c.model);
  const Task t = parse_task(c.task);
  const std::size_t outputs = c.n_outputs ? c.n_outputs : c.classes.size();
  ModelConfig m = c.widths == "paper" ? paper_model(v, t, outputs, c.points) : desk_model(v, t, outputs, c.points);
  if (c.k) {
    for (auto& s : m.encoder.sg_schedule) s.k = c.k;
  }
  if (t == Task::segment) m.head.n_categories = c.n_categories ? c.n_categories : c.classes.size();
  return m;
}

}  // namespace pct
