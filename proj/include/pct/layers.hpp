// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pct/ops.hpp"

namespace pct {

using Rng = std::mt19937_64;

enum class Mode { training, inference };

/// A named tensor owned by some module. Trainable entries receive gradients;
/// the rest (BatchNorm running statistics) are state carried in checkpoints.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};
using ParamList = std::vector<NamedTensor>;

inline std::size_t count_trainable(const ParamList& params) {
  std::size_t total = 0;
  for (const auto& p : params) {
    if (p.trainable) total += static_cast<std::size_t>(p.tensor.size());
  }
  return total;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights.
inline Matrix uniform_fan_in(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

/// y = x W (+ b). Weight is [in x out].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, bool with_bias, Rng& rng)
      : weight(Tensor::from(uniform_fan_in(in, out, rng), true)) {
    if (with_bias) bias = Tensor::vector(RowVector::Zero(static_cast<Eigen::Index>(out)), true);
  }

  std::size_t in_features() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out_features() const { return static_cast<std::size_t>(weight.cols()); }

  Tensor forward(const Tensor& x) const {
    Tensor y = matmul(x, weight);
    return bias.defined() ? add_row(y, bias) : y;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "weight", weight, true});
    if (bias.defined()) out.push_back({prefix + "bias", bias, true});
  }

  Tensor weight;
  Tensor bias;
};

/// BatchNorm over the row axis with one statistic per channel.
class BatchNorm {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t width) {
    const auto w = static_cast<Eigen::Index>(width);
    gamma = Tensor::vector(RowVector::Ones(w), true);
    beta = Tensor::vector(RowVector::Zero(w), true);
    running_mean = Tensor::vector(RowVector::Zero(w));
    running_var = Tensor::vector(RowVector::Ones(w));
  }

  std::size_t width() const { return static_cast<std::size_t>(gamma.cols()); }

  /// Training mode normalizes with batch statistics and folds them into the
  /// running estimates (new = 0.9 old + 0.1 batch); inference uses the
  /// running estimates.
  Tensor forward(const Tensor& x, Mode mode) {
    if (mode == Mode::inference) {
      return batch_norm_eval(x, gamma, beta, running_mean.value().row(0), running_var.value().row(0), kEps);
    }
    BatchStats stats;
    Tensor y = batch_norm_train(x, gamma, beta, kEps, &stats);
    running_mean.mutable_value().row(0) = (1.0 - kMomentum) * running_mean.value().row(0) + kMomentum * stats.mean;
    running_var.mutable_value().row(0) = (1.0 - kMomentum) * running_var.value().row(0) + kMomentum * stats.var;
    return y;
  }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "gamma", gamma, true});
    out.push_back({prefix + "beta", beta, true});
    out.push_back({prefix + "running_mean", running_mean, false});
    out.push_back({prefix + "running_var", running_var, false});
  }

  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
};

/// Linear -> BatchNorm -> ReLU with an optional trailing dropout (LBRD).
class Lbr {
 public:
  Lbr() = default;
  Lbr(std::size_t in, std::size_t out, Rng& rng, double dropout = 0.0)
      : linear(in, out, true, rng), bn(out), dropout_p(dropout) {}

  std::size_t in_features() const { return linear.in_features(); }
  std::size_t out_features() const { return linear.out_features(); }

  Tensor forward(const Tensor& x) {
    if (static_cast<std::size_t>(x.cols()) != in_features()) {
      throw DimensionError("lbr: input shape " + to_string(x.shape()) + " incompatible with weight " +
                           to_string(linear.weight.shape()));
    }
    return relu(bn.forward(linear.forward(x), mode));
  }

  /// Forward including the dropout stage; active only in training mode.
  Tensor forward(const Tensor& x, Rng& rng) { return pct::dropout(forward(x), dropout_p, mode == Mode::training, rng); }

  void set_mode(Mode m) { mode = m; }

  void collect(ParamList& out, const std::string& prefix) const {
    linear.collect(out, prefix + "linear.");
    bn.collect(out, prefix + "bn.");
  }

  Linear linear;
  BatchNorm bn;
  double dropout_p = 0.0;
  Mode mode = Mode::training;
};

}  // namespace pct
