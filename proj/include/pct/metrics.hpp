// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "pct/tensor.hpp"

namespace pct {

/// Index of the largest entry of each row; ties go to the smallest index.
inline std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

/// Per-row argmax restricted to the columns in `allowed` (first listed wins ties).
inline std::vector<int> argmax_in(const Matrix& scores, const std::vector<int>& allowed) {
  if (allowed.empty()) throw ValidationError("argmax_in: empty column set");
  for (int c : allowed) {
    if (c < 0 || c >= scores.cols()) throw RangeError("argmax_in: column " + std::to_string(c) + " out of range");
  }
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    int best = allowed.front();
    for (int c : allowed) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw DimensionError("accuracy: prediction and label counts differ");
  if (pred.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

struct NormalizedNormals {
  Matrix unit;
  std::vector<Eigen::Index> degenerate;  // rows replaced by (0, 0, 1)
};

/// Scales predicted normals to unit length. Zero rows become (0, 0, 1) and
/// are reported.
inline NormalizedNormals normalize_normals(const Matrix& raw) {
  NormalizedNormals out{raw, {}};
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double n = raw.row(i).norm();
    if (n > 0.0 && std::isfinite(n)) {
      out.unit.row(i) /= n;
    } else {
      out.unit.row(i) << 0.0, 0.0, 1.0;
      out.degenerate.push_back(i);
    }
  }
  return out;
}

/// Mean over points of 1 - <pred, gt>; `unsigned_normals` uses |<pred, gt>|.
inline double avg_cosine_error(const Matrix& pred, const Matrix& gt, bool unsigned_normals = false) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw DimensionError("avg_cosine_error: prediction and ground truth shapes differ");
  }
  if (pred.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const double c = pred.row(i).dot(gt.row(i));
    total += 1.0 - (unsigned_normals ? std::abs(c) : c);
  }
  return total / static_cast<double>(pred.rows());
}

/// Mean IoU over the category's parts for one shape. A part absent from both
/// prediction and ground truth scores 1.
inline double shape_iou(const std::vector<int>& pred, const std::vector<int>& gt, const std::vector<int>& parts) {
  if (pred.size() != gt.size()) throw DimensionError("part_iou: prediction and label counts differ");
  if (parts.empty()) throw ValidationError("part_iou: empty part set");
  const std::set<int> allowed(parts.begin(), parts.end());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!allowed.count(pred[i])) throw ValidationError("part_iou: predicted label " + std::to_string(pred[i]) + " outside part set");
    if (!allowed.count(gt[i])) throw ValidationError("part_iou: ground-truth label " + std::to_string(gt[i]) + " outside part set");
  }
  double total = 0.0;
  for (int part : parts) {
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == part;
      const bool g = gt[i] == part;
      inter += p && g;
      uni += p || g;
    }
    total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return total / static_cast<double>(parts.size());
}

struct PartIou {
  std::vector<double> per_shape;
  double mean = 0.0;  // part-average IoU over shapes
};

inline PartIou part_iou(const std::vector<std::vector<int>>& pred, const std::vector<std::vector<int>>& gt,
                        const std::vector<int>& parts) {
  if (pred.size() != gt.size()) throw DimensionError("part_iou: shape counts differ");
  PartIou out;
  for (std::size_t s = 0; s < pred.size(); ++s) out.per_shape.push_back(shape_iou(pred[s], gt[s], parts));
  if (!out.per_shape.empty()) {
    double total = 0.0;
    for (double v : out.per_shape) total += v;
    out.mean = total / static_cast<double>(out.per_shape.size());
  }
  return out;
}

}  // namespace pct
