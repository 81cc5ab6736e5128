// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "pct/layers.hpp"

namespace pct {

struct Schedule {
  double lr_max = 0.01;
  double lr_min = 0.0;
  double total_epochs = 100;
};

/// lr_min + (lr_max - lr_min) (1 + cos(pi t / T)) / 2
inline double cosine_lr(double t, const Schedule& s) {
  if (s.total_epochs <= 0) return s.lr_max;
  if (t < 0 || t > s.total_epochs) throw RangeError("cosine_lr: epoch outside [0, T]");
  return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(std::numbers::pi * t / s.total_epochs));
}

/// Classical momentum SGD: v <- mu v + g (+ wd p); p <- p - lr v.
class Sgd {
 public:
  Sgd(ParamList params, double momentum = 0.9, double weight_decay = 0.0)
      : momentum_(momentum), weight_decay_(weight_decay) {
    for (auto& p : params) {
      if (!p.trainable) continue;
      params_.push_back(p);
      velocity_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
    }
  }

  /// Applies one update from the gradients currently held by the parameters.
  /// Throws NumericError naming the first parameter whose gradient is NaN;
  /// nothing is modified in that case.
  void step(double lr) {
    for (auto& p : params_) {
      if (p.tensor.has_grad() && p.tensor.grad().hasNaN()) {
        throw NumericError("sgd: NaN gradient in parameter '" + p.name + "'");
      }
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& t = params_[i].tensor;
      if (!t.has_grad()) {
        velocity_[i] *= momentum_;
      } else if (weight_decay_ != 0.0) {
        velocity_[i] = momentum_ * velocity_[i] + t.grad() + weight_decay_ * t.value();
      } else {
        velocity_[i] = momentum_ * velocity_[i] + t.grad();
      }
      t.mutable_value() -= lr * velocity_[i];
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  const std::vector<Matrix>& velocity() const { return velocity_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  std::vector<Matrix> velocity_;
  double momentum_;
  double weight_decay_;
};

}  // namespace pct
