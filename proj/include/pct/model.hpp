// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pct/encoder.hpp"
#include "pct/heads.hpp"
#include "pct/point_cloud.hpp"

namespace pct {

struct ModelConfig {
  EncoderConfig encoder;
  HeadConfig head;

  bool dense() const { return head.task != Task::classify; }
};

/// Widths as published: d_e = 128 (256 after neighbor embedding), d_o = 1024,
/// decoder 256 -> 256.
inline ModelConfig paper_model(Variant v, Task task, std::size_t n_outputs, std::size_t n_points = 1024) {
  ModelConfig c;
  c.encoder = paper_encoder(v, task != Task::classify, n_points);
  c.head.task = task;
  c.head.widths = {256, 256};
  c.head.n_outputs = task == Task::normals ? 3 : n_outputs;
  return c;
}

/// Scaled-down widths for single-core training.
inline ModelConfig desk_model(Variant v, Task task, std::size_t n_outputs, std::size_t n_points = 256) {
  ModelConfig c;
  c.encoder = desk_encoder(v, task != Task::classify, n_points);
  c.head.task = task;
  c.head.widths = {128, 64};
  c.head.category_width = 16;
  c.head.n_outputs = task == Task::normals ? 3 : n_outputs;
  return c;
}

/// Encoder plus task head. Dense outputs are returned in input point order.
class PctModel {
 public:
  /// Everything the forward pass produced, for diagnostics.
  struct Trace {
    Embedding embedding;
    std::vector<Tensor> layer_inputs;
    Tensor point_features;  // F_o in embedding order
    Tensor global;          // F_g, one row per cloud
    Tensor scores;
  };

  PctModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), rng_(seed) {
    if (config_.head.task == Task::normals) config_.head.n_outputs = 3;
    encoder = Encoder(config_.encoder, rng_);
    const std::size_t d_o = config_.encoder.d_o;
    if (config_.head.task == Task::classify) {
      classify_head = ClassifyHead(2 * d_o, config_.head, rng_);
    } else {
      dense_head = DenseHead(d_o, 2 * d_o, config_.head, rng_);
    }
    set_mode(Mode::training);
  }

  const ModelConfig& config() const { return config_; }
  Mode mode() const { return mode_; }
  Rng& rng() { return rng_; }

  void set_mode(Mode m) {
    mode_ = m;
    encoder.set_mode(m);
    classify_head.set_mode(m);
    dense_head.set_mode(m);
  }

  Trace trace(const std::vector<const PointCloud*>& batch) {
    if (batch.empty()) throw CountError("model: empty batch");
    const std::size_t n = batch.front()->size();
    Matrix coords(static_cast<Eigen::Index>(batch.size() * n), 3);
    std::vector<int> categories;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      if (batch[b]->size() != n) throw DimensionError("model: clouds in a batch must have equal point counts");
      coords.middleRows(static_cast<Eigen::Index>(b * n), static_cast<Eigen::Index>(n)) = batch[b]->coords;
      categories.push_back(batch[b]->category.value_or(0));
    }
    const std::size_t nb = batch.size();

    Trace t;
    t.embedding = encoder.embed(coords, nb);
    t.point_features = encoder.encode(t.embedding.features, nb, &t.layer_inputs);
    t.global = global_feature(t.point_features, t.embedding.points);
    if (config_.head.task == Task::classify) {
      t.scores = classify_head.forward(t.global, rng_);
      return t;
    }
    if (t.embedding.points != n) {
      throw ValidationError("model: per-point tasks need a size-preserving SG schedule");
    }
    const Tensor dense = dense_head.forward(t.point_features, t.global, categories, n, rng_);
    std::vector<Eigen::Index> to_input(nb * n);
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t s = 0; s < n; ++s) {
        to_input[b * n + static_cast<std::size_t>(t.embedding.source[b * n + s])] = static_cast<Eigen::Index>(b * n + s);
      }
    }
    t.scores = gather_rows(dense, std::move(to_input));
    return t;
  }

  /// Scores: [batch x classes] for classification, [(batch * N) x outputs]
  /// otherwise.
  Tensor forward(const std::vector<const PointCloud*>& batch) { return trace(batch).scores; }

  /// Graph-free forward of one cloud in the current mode.
  Matrix predict(const PointCloud& cloud) {
    NoGradGuard no_grad;
    return forward({&cloud}).value();
  }

  ParamList parameters() const {
    ParamList p;
    encoder.collect(p, "encoder.");
    if (config_.head.task == Task::classify) {
      classify_head.collect(p, "head.");
    } else {
      dense_head.collect(p, "head.");
    }
    return p;
  }

  std::vector<Tensor> trainable() const {
    std::vector<Tensor> out;
    for (auto& p : parameters()) {
      if (p.trainable) out.push_back(p.tensor);
    }
    return out;
  }

  Encoder encoder;
  ClassifyHead classify_head;
  DenseHead dense_head;

 private:
  ModelConfig config_;
  Rng rng_;
  Mode mode_ = Mode::training;
};

/// Trainable parameter counts grouped by the first two name components
/// (e.g. "encoder.attention0"), in first-seen order.
inline std::vector<std::pair<std::string, std::size_t>> parameter_summary(const ParamList& params) {
  std::vector<std::pair<std::string, std::size_t>> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& p : params) {
    if (!p.trainable) continue;
    const auto first = p.name.find('.');
    const auto second = first == std::string::npos ? std::string::npos : p.name.find('.', first + 1);
    const std::string group = p.name.substr(0, second);
    auto [it, fresh] = slot.emplace(group, out.size());
    if (fresh) out.emplace_back(group, 0);
    out[it->second].second += static_cast<std::size_t>(p.tensor.size());
  }
  return out;
}

/// Scale factors 0.7, 0.8, ..., 1.4.
inline std::vector<double> default_test_scales() {
  std::vector<double> s;
  for (int i = 7; i <= 14; ++i) s.push_back(i / 10.0);
  return s;
}

/// Averages row-softmax probabilities of `score_fn` over uniformly scaled
/// copies of `cloud`. Take argmax_rows of the result for labels.
template <class ScoreFn>
Matrix multi_scale_eval(ScoreFn&& score_fn, const PointCloud& cloud, const std::vector<double>& scales) {
  if (scales.empty()) throw CountError("multi_scale_eval: no scales");
  Matrix total;
  for (double s : scales) {
    PointCloud scaled = cloud;
    scaled.coords *= s;
    const Matrix probs = softmax_values(score_fn(scaled), Axis::rows);
    if (total.size() == 0) {
      total = probs;
    } else {
      total += probs;
    }
  }
  return total / static_cast<double>(scales.size());
}

}  // namespace pct
