// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pct/tensor.hpp"

namespace pct {

/// N points with 3D coordinates and optional per-point normals and labels.
struct PointCloud {
  Matrix coords;                       // N x 3
  std::optional<Matrix> normals;       // N x 3, unit length
  std::optional<std::vector<int>> labels;
  std::optional<int> category;

  std::size_t size() const { return static_cast<std::size_t>(coords.rows()); }

  void validate() const {
    if (coords.rows() < 1) throw ValidationError("point cloud: needs at least one point");
    if (coords.cols() != 3) throw ValidationError("point cloud: coordinates must have 3 columns");
    if (!coords.allFinite()) throw ValidationError("point cloud: non-finite coordinate");
    if (normals) {
      if (normals->rows() != coords.rows() || normals->cols() != 3) {
        throw ValidationError("point cloud: normals must be N x 3");
      }
      for (Eigen::Index i = 0; i < normals->rows(); ++i) {
        if (std::abs(normals->row(i).norm() - 1.0) > 1e-6) {
          throw ValidationError("point cloud: normal " + std::to_string(i) + " is not unit length");
        }
      }
    }
    if (labels && labels->size() != size()) throw ValidationError("point cloud: label count differs from N");
  }

  /// Row subset (with normals and labels) in the given order.
  PointCloud select(const std::vector<Eigen::Index>& rows) const {
    PointCloud out;
    out.category = category;
    out.coords.resize(static_cast<Eigen::Index>(rows.size()), 3);
    if (normals) out.normals = Matrix(static_cast<Eigen::Index>(rows.size()), 3);
    if (labels) out.labels = std::vector<int>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out.coords.row(r) = coords.row(rows[i]);
      if (normals) out.normals->row(r) = normals->row(rows[i]);
      if (labels) (*out.labels)[i] = (*labels)[static_cast<std::size_t>(rows[i])];
    }
    return out;
  }
};

}  // namespace pct
