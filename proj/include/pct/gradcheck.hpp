// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pct/tensor.hpp"

namespace pct {

/// Compares the analytic gradient of the scalar `f` with respect to the leaf
/// `x` against central differences (f(x+eps) - f(x-eps)) / 2eps, coordinate by
/// coordinate. Returns the largest |a - n| / max(|a|, |n|, 1e-8).
///
/// `f` must rebuild its graph from the current value of `x` on every call.
inline double gradcheck(const std::function<Tensor()>& f, Tensor x, double eps = 1e-6) {
  if (eps < 1e-7 || eps > 1e-3) throw RangeError("gradcheck: eps must lie in [1e-7, 1e-3]");
  x.zero_grad();
  f().backward();
  const Matrix analytic = x.grad();
  x.zero_grad();

  NoGradGuard no_grad;
  double worst = 0.0;
  Matrix& v = x.mutable_value();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double saved = v.data()[i];
    v.data()[i] = saved + eps;
    const double plus = f().item();
    v.data()[i] = saved - eps;
    const double minus = f().item();
    v.data()[i] = saved;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic.data()[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

/// Runs gradcheck for every tensor in `inputs` and returns the worst error.
inline double gradcheck_all(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                            double eps = 1e-6) {
  double worst = 0.0;
  for (const auto& t : inputs) worst = std::max(worst, gradcheck(f, t, eps));
  return worst;
}

}  // namespace pct
