// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pct/ops.hpp"

namespace pct {

/// Label-smoothed cross-entropy averaged over rows. The target puts
/// (1 - epsilon) on the true class and adds epsilon / C to every class.
inline Tensor soft_cross_entropy(const Tensor& scores, const std::vector<int>& labels, double epsilon = 0.2) {
  if (epsilon < 0.0 || epsilon >= 1.0) throw RangeError("soft_cross_entropy: epsilon must lie in [0, 1)");
  if (static_cast<Eigen::Index>(labels.size()) != scores.rows()) {
    throw DimensionError("soft_cross_entropy: " + std::to_string(labels.size()) + " labels for scores " +
                         to_string(scores.shape()));
  }
  const Eigen::Index classes = scores.cols();
  Matrix target = Matrix::Constant(scores.rows(), classes, epsilon / static_cast<double>(classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw RangeError("soft_cross_entropy: label " + std::to_string(labels[i]) + " outside [0, " +
                       std::to_string(classes) + ")");
    }
    target(static_cast<Eigen::Index>(i), labels[i]) += 1.0 - epsilon;
  }
  const Tensor log_p = log_softmax_rows(scores);
  return affine(sum(mul(Tensor::from(std::move(target)), log_p)), -1.0 / static_cast<double>(scores.rows()));
}

/// mean(1 - <pred / |pred|, gt>) with gt rows of unit length.
inline Tensor cosine_loss(const Tensor& pred, const Matrix& gt) {
  return affine(mean(row_dot(l2_normalize_rows(pred), Tensor::from(gt))), -1.0, 1.0);
}

}  // namespace pct
