// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pct/layers.hpp"
#include "pct/sampling.hpp"

namespace pct {

/// One sampling-and-grouping stage: sampled point count, neighbor count and
/// output channels. `n_out == 0` keeps the input point count.
struct SgStage {
  std::size_t n_out = 0;
  std::size_t k = 32;
  std::size_t channels = 128;
};

/// Sample-and-group layer.
///
/// FPS picks the output points; each one gathers its k nearest input points,
/// forms the rows [F(q) - F(p), F(p)], runs them through LBR -> LBR and
/// max-pools over the k rows.
///
/// Inputs are batches of equally sized clouds stacked along the row axis.
class SgLayer {
 public:
  struct Output {
    Matrix coords;                       // (batch * n_out) x 3
    Tensor features;                     // (batch * n_out) x channels
    std::vector<Eigen::Index> sampled;   // per-cloud local row of each output point
  };

  SgLayer() = default;
  SgLayer(std::size_t in_channels, SgStage stage, Rng& rng)
      : lbr1(2 * in_channels, stage.channels, rng), lbr2(stage.channels, stage.channels, rng), stage_(stage) {}

  const SgStage& stage() const { return stage_; }
  std::size_t in_channels() const { return lbr1.in_features() / 2; }
  std::size_t out_channels() const { return stage_.channels; }

  /// Resolved output size for clouds of `n` points.
  std::size_t output_points(std::size_t n) const { return stage_.n_out == 0 ? n : stage_.n_out; }

  Output forward(const Matrix& coords, const Tensor& features, std::size_t batch) {
    if (batch == 0 || coords.rows() % static_cast<Eigen::Index>(batch) != 0) {
      throw DimensionError("sg_layer: " + std::to_string(coords.rows()) + " rows do not split into " +
                           std::to_string(batch) + " clouds");
    }
    if (features.rows() != coords.rows()) {
      throw DimensionError("sg_layer: features " + to_string(features.shape()) + " do not match " +
                           std::to_string(coords.rows()) + " points");
    }
    if (static_cast<std::size_t>(features.cols()) != in_channels()) {
      throw DimensionError("sg_layer: features " + to_string(features.shape()) + " but layer expects " +
                           std::to_string(in_channels()) + " channels");
    }
    const Eigen::Index n = coords.rows() / static_cast<Eigen::Index>(batch);
    const std::size_t m = output_points(static_cast<std::size_t>(n));
    const std::size_t k = stage_.k;

    Output out;
    out.coords.resize(static_cast<Eigen::Index>(batch * m), 3);
    out.sampled.reserve(batch * m);
    std::vector<Eigen::Index> centers;
    std::vector<Eigen::Index> neighbors;
    centers.reserve(batch * m);
    neighbors.reserve(batch * m * k);
    for (std::size_t b = 0; b < batch; ++b) {
      const Eigen::Index base = static_cast<Eigen::Index>(b) * n;
      const Matrix cloud = coords.middleRows(base, n);
      const auto picked = farthest_point_sample(cloud, m);
      Matrix queries(static_cast<Eigen::Index>(m), 3);
      for (std::size_t s = 0; s < m; ++s) queries.row(static_cast<Eigen::Index>(s)) = cloud.row(picked[s]);
      const IndexMatrix nbr = knn(cloud, queries, k);
      for (std::size_t s = 0; s < m; ++s) {
        out.coords.row(static_cast<Eigen::Index>(b * m + s)) = queries.row(static_cast<Eigen::Index>(s));
        out.sampled.push_back(picked[s]);
        centers.push_back(base + picked[s]);
        for (std::size_t j = 0; j < k; ++j) neighbors.push_back(base + nbr(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j)));
      }
    }

    const Tensor center_features = gather_rows(features, std::move(centers));
    const Tensor repeated = repeat_rows(center_features, static_cast<Eigen::Index>(k));
    const Tensor offsets = sub(gather_rows(features, std::move(neighbors)), repeated);
    const Tensor grouped = hcat({offsets, repeated});
    out.features = segment_max(lbr2.forward(lbr1.forward(grouped)), static_cast<Eigen::Index>(k));
    return out;
  }

  void set_mode(Mode m) {
    lbr1.set_mode(m);
    lbr2.set_mode(m);
  }

  void collect(ParamList& out, const std::string& prefix) const {
    lbr1.collect(out, prefix + "lbr1.");
    lbr2.collect(out, prefix + "lbr2.");
  }

  Lbr lbr1;
  Lbr lbr2;

 private:
  SgStage stage_;
};

}  // namespace pct
