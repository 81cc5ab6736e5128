// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pct/layers.hpp"

namespace pct {

enum class Task { classify, segment, normals };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::classify: return "classify";
    case Task::segment: return "segment";
    case Task::normals: return "normals";
  }
  return "?";
}

inline Task parse_task(const std::string& s) {
  if (s == "classify") return Task::classify;
  if (s == "segment") return Task::segment;
  if (s == "normals") return Task::normals;
  throw ValidationError("task: unknown task '" + s + "' (expected classify|segment|normals)");
}

struct HeadConfig {
  Task task = Task::classify;
  std::vector<std::size_t> widths{256, 256};
  std::size_t n_outputs = 40;       // classes, parts, or 3 for normals
  std::size_t n_categories = 16;    // segmentation only
  std::size_t category_width = 64;  // segmentation only
  double dropout = 0.5;
};

/// LBRD -> LBRD -> Linear on the global feature.
class ClassifyHead {
 public:
  ClassifyHead() = default;
  ClassifyHead(std::size_t in, const HeadConfig& cfg, Rng& rng)
      : lbr1(in, cfg.widths.at(0), rng, cfg.dropout),
        lbr2(cfg.widths.at(0), cfg.widths.at(1), rng, cfg.dropout),
        out(cfg.widths.at(1), cfg.n_outputs, true, rng) {}

  Tensor forward(const Tensor& global, Rng& rng) { return out.forward(lbr2.forward(lbr1.forward(global, rng), rng)); }

  void set_mode(Mode m) {
    lbr1.set_mode(m);
    lbr2.set_mode(m);
  }
  void collect(ParamList& p, const std::string& prefix) const {
    lbr1.collect(p, prefix + "lbr1.");
    lbr2.collect(p, prefix + "lbr2.");
    out.collect(p, prefix + "out.");
  }

  Lbr lbr1;
  Lbr lbr2;
  Linear out;
};

/// Per-point decoder for segmentation and normal estimation. Each point sees
/// concat(F_o row, F_g of its cloud[, category embedding]); dropout only after
/// the first LBR.
class DenseHead {
 public:
  DenseHead() = default;
  DenseHead(std::size_t point_width, std::size_t global_width, const HeadConfig& cfg, Rng& rng)
      : with_category_(cfg.task == Task::segment) {
    std::size_t in = point_width + global_width;
    if (with_category_) {
      category_embedding = Tensor::from(uniform_fan_in(cfg.n_categories, cfg.category_width, rng), true);
      in += cfg.category_width;
    }
    lbr1 = Lbr(in, cfg.widths.at(0), rng, cfg.dropout);
    lbr2 = Lbr(cfg.widths.at(0), cfg.widths.at(1), rng);
    out = Linear(cfg.widths.at(1), cfg.n_outputs, true, rng);
  }

  bool uses_category() const { return with_category_; }
  std::size_t n_categories() const { return with_category_ ? static_cast<std::size_t>(category_embedding.rows()) : 0; }

  /// `categories` holds one index per cloud (ignored without a category embedding).
  Tensor forward(const Tensor& point_features, const Tensor& global, const std::vector<int>& categories,
                 std::size_t points, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(points);
    std::vector<Tensor> parts{point_features, repeat_rows(global, n)};
    if (with_category_) {
      std::vector<Eigen::Index> rows;
      rows.reserve(categories.size() * points);
      for (int c : categories) {
        if (c < 0 || static_cast<std::size_t>(c) >= n_categories()) {
          throw RangeError("segment: category " + std::to_string(c) + " outside [0, " +
                           std::to_string(n_categories()) + ")");
        }
        rows.insert(rows.end(), points, c);
      }
      parts.push_back(gather_rows(category_embedding, std::move(rows)));
    }
    return out.forward(lbr2.forward(lbr1.forward(hcat(parts), rng)));
  }

  void set_mode(Mode m) {
    lbr1.set_mode(m);
    lbr2.set_mode(m);
  }
  void collect(ParamList& p, const std::string& prefix) const {
    if (with_category_) p.push_back({prefix + "category_embedding", category_embedding, true});
    lbr1.collect(p, prefix + "lbr1.");
    lbr2.collect(p, prefix + "lbr2.");
    out.collect(p, prefix + "out.");
  }

  Tensor category_embedding;
  Lbr lbr1;
  Lbr lbr2;
  Linear out;

 private:
  bool with_category_ = false;
};

}  // namespace pct
