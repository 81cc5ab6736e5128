// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "pct/layers.hpp"
#include "pct/point_cloud.hpp"

namespace pct {

struct AugmentConfig {
  bool scale = true;
  double scale_min = 0.67;
  double scale_max = 1.5;
  bool translate = true;
  double translate_range = 0.2;
  bool dropout = true;
  double dropout_max_ratio = 0.2;

  // Pin a random draw (tests and diagnostics).
  std::optional<Eigen::RowVector3d> forced_scale;
  std::optional<double> forced_dropout_ratio;

  static AugmentConfig none() {
    AugmentConfig c;
    c.scale = c.translate = c.dropout = false;
    return c;
  }
};

/// Training-time augmentation: per-axis scaling, then a global translation,
/// then input dropout. Dropped points are overwritten with the first kept
/// point so N is unchanged. Normals follow the inverse-transpose of the
/// scaling and are renormalized.
inline PointCloud augment(const PointCloud& input, Rng& rng, const AugmentConfig& cfg) {
  PointCloud out = input;
  const Eigen::Index n = out.coords.rows();

  if (cfg.scale) {
    Eigen::RowVector3d s;
    if (cfg.forced_scale) {
      s = *cfg.forced_scale;
    } else {
      std::uniform_real_distribution<double> dist(cfg.scale_min, cfg.scale_max);
      for (int c = 0; c < 3; ++c) s(c) = dist(rng);
    }
    out.coords = out.coords.array().rowwise() * s.array();
    if (out.normals) {
      Matrix nrm = out.normals->array().rowwise() / s.array();
      nrm.rowwise().normalize();
      out.normals = std::move(nrm);
    }
  }

  if (cfg.translate) {
    std::uniform_real_distribution<double> dist(-cfg.translate_range, cfg.translate_range);
    Eigen::RowVector3d t;
    for (int c = 0; c < 3; ++c) t(c) = dist(rng);
    out.coords = out.coords.rowwise() + t;
  }

  if (cfg.dropout && n > 1) {
    double ratio;
    if (cfg.forced_dropout_ratio) {
      ratio = *cfg.forced_dropout_ratio;
    } else {
      std::uniform_real_distribution<double> dist(0.0, cfg.dropout_max_ratio);
      ratio = dist(rng);
    }
    auto count = static_cast<Eigen::Index>(std::floor(ratio * static_cast<double>(n)));
    count = std::clamp<Eigen::Index>(count, 0, n - 1);
    if (count > 0) {
      std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<char> dropped(static_cast<std::size_t>(n), 0);
      for (Eigen::Index i = 0; i < count; ++i) dropped[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = 1;
      Eigen::Index fill = 0;
      while (dropped[static_cast<std::size_t>(fill)]) ++fill;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!dropped[static_cast<std::size_t>(i)]) continue;
        out.coords.row(i) = out.coords.row(fill);
        if (out.normals) out.normals->row(i) = out.normals->row(fill);
        if (out.labels) (*out.labels)[static_cast<std::size_t>(i)] = (*out.labels)[static_cast<std::size_t>(fill)];
      }
    }
  }
  return out;
}

}  // namespace pct
