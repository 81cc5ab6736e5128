// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable operations on Tensor. Every op validates shapes up front and
// registers a backward closure that accumulates into its parents.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "pct/tensor.hpp"

namespace pct {

/// Softmax direction. `rows` normalizes within each row (each row sums to 1),
/// `cols` within each column.
enum class Axis { rows, cols };

namespace detail {

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape " + to_string(a.shape()) + " does not match " +
                         to_string(b.shape()));
  }
}

}  // namespace detail

/// Distance of the current evaluation from the nonsmooth points of relu and
/// segment_max, recorded while a MarginMonitor is alive on this thread.
/// Central differences are only trustworthy when every step stays inside
/// one smooth piece.
struct SmoothnessMargin {
  double relu = INFINITY;     // min |input| over relu entries
  double max_gap = INFINITY;  // min (max - runner-up) over segment_max columns, exact ties skipped
  double norm = INFINITY;     // min row norm fed to l2_normalize_rows
  double min() const { return std::min({relu, max_gap, norm}); }
};

namespace detail {
inline thread_local SmoothnessMargin* active_margin = nullptr;
}  // namespace detail

class MarginMonitor {
 public:
  MarginMonitor() : previous_(detail::active_margin) { detail::active_margin = &margin_; }
  ~MarginMonitor() { detail::active_margin = previous_; }
  MarginMonitor(const MarginMonitor&) = delete;
  MarginMonitor& operator=(const MarginMonitor&) = delete;

  const SmoothnessMargin& margin() const { return margin_; }

 private:
  SmoothnessMargin margin_;
  SmoothnessMargin* previous_;
};

namespace detail {

inline void require_finite(const char* op, const Matrix& m) {
  if (m.hasNaN()) throw NumericError(std::string(op) + ": NaN in input");
}

inline Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: shape " + to_string(a.shape()) + " incompatible with " +
                         to_string(b.shape()));
  }
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](detail::Node& n) {
    auto& pa = detail::parent(n, 0);
    auto& pb = detail::parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

/// a * b^T without materializing the transpose.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: shape " + to_string(a.shape()) + " incompatible with " +
                         to_string(b.shape()) + " transposed");
  }
  Matrix out = a.value() * b.value().transpose();
  return make_result(std::move(out), {a, b}, [](detail::Node& n) {
    auto& pa = detail::parent(n, 0);
    auto& pb = detail::parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value);
    if (pb.requires_grad) pb.accumulate(n.grad.transpose() * pa.value);
  });
}

inline Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return make_result(std::move(out), {a}, [](detail::Node& n) {
    detail::parent(n, 0).accumulate(n.grad.transpose());
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  Matrix out = a.value() + b.value();
  return make_result(std::move(out), a.shape(), {a, b}, [](detail::Node& n) {
    detail::parent(n, 0).accumulate(n.grad);
    detail::parent(n, 1).accumulate(n.grad);
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("sub", a, b);
  Matrix out = a.value() - b.value();
  return make_result(std::move(out), a.shape(), {a, b}, [](detail::Node& n) {
    detail::parent(n, 0).accumulate(n.grad);
    detail::parent(n, 1).accumulate(-n.grad);
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mul", a, b);
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), a.shape(), {a, b}, [](detail::Node& n) {
    auto& pa = detail::parent(n, 0);
    auto& pb = detail::parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(n.grad.cwiseProduct(pa.value));
  });
}

/// scale * a + shift, elementwise.
inline Tensor affine(const Tensor& a, double scale, double shift = 0.0) {
  Matrix out = (a.value().array() * scale + shift).matrix();
  return make_result(std::move(out), a.shape(), {a}, [scale](detail::Node& n) {
    detail::parent(n, 0).accumulate(n.grad * scale);
  });
}

/// x + b with the rank-1 `b` broadcast over rows.
inline Tensor add_row(const Tensor& x, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw DimensionError("add_row: bias shape " + to_string(b.shape()) + " incompatible with " +
                         to_string(x.shape()));
  }
  Matrix out = x.value().rowwise() + b.value().row(0);
  return make_result(std::move(out), {x, b}, [](detail::Node& n) {
    detail::parent(n, 0).accumulate(n.grad);
    auto& pb = detail::parent(n, 1);
    if (pb.requires_grad) pb.accumulate(n.grad.colwise().sum());
  });
}

inline Tensor relu(const Tensor& x) {
  if (detail::active_margin) {
    detail::active_margin->relu = std::min(detail::active_margin->relu, x.value().cwiseAbs().minCoeff());
  }
  Matrix out = x.value().cwiseMax(0.0);
  return make_result(std::move(out), x.shape(), {x}, [](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    px.accumulate((px.value.array() > 0.0).select(n.grad, 0.0).matrix());
  });
}

/// Inverted dropout: in training, zeroes each entry with probability `p` and
/// scales survivors by 1/(1-p). Identity otherwise.
template <class Rng>
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw RangeError("dropout: probability must be < 1");
  const double keep = 1.0 - p;
  std::bernoulli_distribution coin(keep);
  Matrix mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = coin(rng) ? 1.0 / keep : 0.0;
  Matrix out = x.value().cwiseProduct(mask);
  return make_result(std::move(out), x.shape(), {x}, [mask = std::move(mask)](detail::Node& n) {
    detail::parent(n, 0).accumulate(n.grad.cwiseProduct(mask));
  });
}

// ---------------------------------------------------------------------------
// Normalizations

inline Matrix softmax_values(const Matrix& x, Axis axis) {
  Matrix out(x.rows(), x.cols());
  if (axis == Axis::rows) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double m = x.row(i).maxCoeff();
      out.row(i) = (x.row(i).array() - m).exp().matrix();
      out.row(i) /= out.row(i).sum();
    }
  } else {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double m = x.col(j).maxCoeff();
      out.col(j) = (x.col(j).array() - m).exp().matrix();
      out.col(j) /= out.col(j).sum();
    }
  }
  return out;
}

inline Tensor softmax(const Tensor& x, Axis axis) {
  detail::require_finite("softmax", x.value());
  Matrix out = softmax_values(x.value(), axis);
  return make_result(std::move(out), x.shape(), {x}, [axis](detail::Node& n) {
    const Matrix& s = n.value;
    Matrix gs = n.grad.cwiseProduct(s);
    Matrix g;
    if (axis == Axis::rows) {
      g = gs - s.cwiseProduct(gs.rowwise().sum().replicate(1, s.cols()));
    } else {
      g = gs - s.cwiseProduct(gs.colwise().sum().replicate(s.rows(), 1));
    }
    detail::parent(n, 0).accumulate(g);
  });
}

/// Row-wise log-softmax.
inline Tensor log_softmax_rows(const Tensor& x) {
  detail::require_finite("log_softmax", x.value());
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.value().row(i).maxCoeff();
    const double lse = m + std::log((x.value().row(i).array() - m).exp().sum());
    out.row(i) = (x.value().row(i).array() - lse).matrix();
  }
  return make_result(std::move(out), x.shape(), {x}, [](detail::Node& n) {
    Matrix s = n.value.array().exp().matrix();
    Matrix g = n.grad - s.cwiseProduct(n.grad.rowwise().sum().replicate(1, s.cols()));
    detail::parent(n, 0).accumulate(g);
  });
}

/// Divides each row by its sum. Row sums must be strictly positive.
inline Tensor l1_normalize_rows(const Tensor& x) {
  Eigen::VectorXd sums = x.value().rowwise().sum();
  for (Eigen::Index i = 0; i < sums.size(); ++i) {
    if (!(sums(i) > 0.0)) {
      throw NumericError("l1_normalize_rows: row " + std::to_string(i) + " has non-positive sum");
    }
  }
  Matrix out = x.value().array().colwise() / sums.array();
  return make_result(std::move(out), x.shape(), {x}, [sums](detail::Node& n) {
    // y = x / s, s = sum(x): dx = (g - sum(g * y)) / s
    Eigen::VectorXd gy = n.grad.cwiseProduct(n.value).rowwise().sum();
    Matrix g = (n.grad.colwise() - gy).array().colwise() / sums.array();
    detail::parent(n, 0).accumulate(g);
  });
}

/// Scales each row to unit Euclidean length; rows with norm below `eps` are
/// left unscaled.
inline Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12) {
  Eigen::VectorXd norms = x.value().rowwise().norm();
  if (detail::active_margin && norms.size()) {
    detail::active_margin->norm = std::min(detail::active_margin->norm, norms.minCoeff());
  }
  Eigen::VectorXd inv = norms.unaryExpr([eps](double v) { return v > eps ? 1.0 / v : 1.0; });
  Matrix out = x.value().array().colwise() * inv.array();
  return make_result(std::move(out), x.shape(), {x}, [inv, norms, eps](detail::Node& n) {
    Matrix g(n.grad.rows(), n.grad.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      if (norms(i) > eps) {
        const double gy = n.grad.row(i).dot(n.value.row(i));
        g.row(i) = (n.grad.row(i) - gy * n.value.row(i)) * inv(i);
      } else {
        g.row(i) = n.grad.row(i);
      }
    }
    detail::parent(n, 0).accumulate(g);
  });
}

/// Per-row inner product of two same-shape matrices, as a column vector.
inline Tensor row_dot(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("row_dot", a, b);
  Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return make_result(std::move(out), {a, b}, [](detail::Node& n) {
    auto& pa = detail::parent(n, 0);
    auto& pb = detail::parent(n, 1);
    if (pa.requires_grad) pa.accumulate(pb.value.array().colwise() * n.grad.col(0).array());
    if (pb.requires_grad) pb.accumulate(pa.value.array().colwise() * n.grad.col(0).array());
  });
}

// ---------------------------------------------------------------------------
// Batch normalization over rows, one statistic per column.

struct BatchStats {
  RowVector mean;
  RowVector var;  // biased
};

inline Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                               BatchStats* stats = nullptr) {
  const Eigen::Index rows = x.rows();
  if (rows < 2) {
    throw DegenerateBatchError("batch_norm: training mode needs at least 2 rows, got " +
                               std::to_string(rows));
  }
  if (gamma.cols() != x.cols() || beta.cols() != x.cols()) {
    throw DimensionError("batch_norm: parameters " + to_string(gamma.shape()) + " incompatible with " +
                         to_string(x.shape()));
  }
  RowVector mean = x.value().colwise().mean();
  Matrix centered = x.value().rowwise() - mean;
  RowVector var = centered.array().square().colwise().mean().matrix();
  RowVector inv_std = (var.array() + eps).rsqrt().matrix();
  Matrix xhat = centered.array().rowwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  if (stats) *stats = {mean, var};
  return make_result(
      std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& n) {
        auto& px = detail::parent(n, 0);
        auto& pg = detail::parent(n, 1);
        auto& pb = detail::parent(n, 2);
        const double count = static_cast<double>(n.grad.rows());
        if (pg.requires_grad) pg.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
        if (pb.requires_grad) pb.accumulate(n.grad.colwise().sum());
        if (px.requires_grad) {
          Matrix dxhat = n.grad.array().rowwise() * pg.value.row(0).array();
          RowVector sum_d = dxhat.colwise().sum();
          RowVector sum_dx = dxhat.cwiseProduct(xhat).colwise().sum();
          Matrix dx = (dxhat * count).rowwise() - sum_d;
          dx -= (xhat.array().rowwise() * sum_dx.array()).matrix();
          dx = dx.array().rowwise() * (inv_std.array() / count);
          px.accumulate(dx);
        }
      });
}

inline Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                              const RowVector& running_mean, const RowVector& running_var, double eps) {
  if (gamma.cols() != x.cols() || running_mean.size() != x.cols()) {
    throw DimensionError("batch_norm: parameters " + to_string(gamma.shape()) + " incompatible with " +
                         to_string(x.shape()));
  }
  RowVector inv_std = (running_var.array() + eps).rsqrt().matrix();
  Matrix xhat = (x.value().rowwise() - running_mean).array().rowwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& n) {
                       auto& px = detail::parent(n, 0);
                       auto& pg = detail::parent(n, 1);
                       auto& pb = detail::parent(n, 2);
                       if (pg.requires_grad) pg.accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
                       if (pb.requires_grad) pb.accumulate(n.grad.colwise().sum());
                       if (px.requires_grad) {
                         px.accumulate(n.grad.array().rowwise() *
                                       (pg.value.row(0).array() * inv_std.array()));
                       }
                     });
}

// ---------------------------------------------------------------------------
// Structural ops

/// Side-by-side concatenation (channel axis).
inline Tensor hcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("hcat: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("hcat: shape " + to_string(p.shape()) + " incompatible with " +
                           to_string(parts.front().shape()));
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    offsets.push_back(c);
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make_result(std::move(out), parts, [offsets](detail::Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = *n.parents[i];
      if (p.requires_grad) p.accumulate(n.grad.middleCols(offsets[i], p.value.cols()));
    }
  });
}

/// Stacks rows (point axis).
inline Tensor vcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("vcat: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("vcat: shape " + to_string(p.shape()) + " incompatible with " +
                           to_string(parts.front().shape()));
    }
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Eigen::Index> offsets;
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    offsets.push_back(r);
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make_result(std::move(out), parts, [offsets](detail::Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      auto& p = *n.parents[i];
      if (p.requires_grad) p.accumulate(n.grad.middleRows(offsets[i], p.value.rows()));
    }
  });
}

inline Tensor slice_rows(const Tensor& x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for shape " + to_string(x.shape()));
  }
  Matrix out = x.value().middleRows(begin, count);
  return make_result(std::move(out), {x}, [begin, count](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    g.middleRows(begin, count) = n.grad;
    px.accumulate(g);
  });
}

/// out.row(i) = x.row(index[i]); backward scatter-adds.
inline Tensor gather_rows(const Tensor& x, std::vector<Eigen::Index> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x.rows()) {
      throw RangeError("gather_rows: index " + std::to_string(index[i]) + " out of range for shape " +
                       to_string(x.shape()));
    }
    out.row(static_cast<Eigen::Index>(i)) = x.value().row(index[i]);
  }
  return make_result(std::move(out), {x}, [index = std::move(index)](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    for (std::size_t i = 0; i < index.size(); ++i) g.row(index[i]) += n.grad.row(static_cast<Eigen::Index>(i));
    px.accumulate(g);
  });
}

/// RP(x, k): every row of `x` repeated k times consecutively.
inline Tensor repeat_rows(const Tensor& x, Eigen::Index k) {
  if (k < 1) throw CountError("repeat_rows: k must be >= 1");
  Matrix out(x.rows() * k, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.middleRows(i * k, k) = x.value().row(i).replicate(k, 1);
  return make_result(std::move(out), {x}, [k](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    Matrix g(px.value.rows(), px.value.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) = n.grad.middleRows(i * k, k).colwise().sum();
    px.accumulate(g);
  });
}

namespace detail {
inline void require_segments(const char* op, const Tensor& x, Eigen::Index seg) {
  if (seg < 1 || x.rows() % seg != 0) {
    throw DimensionError(std::string(op) + ": " + std::to_string(x.rows()) + " rows do not split into groups of " +
                         std::to_string(seg));
  }
}
}  // namespace detail

/// Column-wise max over consecutive groups of `seg` rows. Ties route the
/// gradient to the smallest row index of the group.
inline Tensor segment_max(const Tensor& x, Eigen::Index seg) {
  detail::require_segments("segment_max", x, seg);
  const Eigen::Index groups = x.rows() / seg;
  const Eigen::Index cols = x.cols();
  Matrix out(groups, cols);
  std::vector<Eigen::Index> argmax(static_cast<std::size_t>(groups * cols));
  const Matrix& v = x.value();
  for (Eigen::Index g = 0; g < groups; ++g) {
    const Eigen::Index base = g * seg;
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::Index best = base;
      double bv = v(base, c);
      for (Eigen::Index r = base + 1; r < base + seg; ++r) {
        if (v(r, c) > bv) {
          bv = v(r, c);
          best = r;
        }
      }
      if (detail::active_margin) {
        for (Eigen::Index r = base; r < base + seg; ++r) {
          if (v(r, c) != bv) detail::active_margin->max_gap = std::min(detail::active_margin->max_gap, bv - v(r, c));
        }
      }
      out(g, c) = bv;
      argmax[static_cast<std::size_t>(g * cols + c)] = best;
    }
  }
  return make_result(std::move(out), {x}, [argmax = std::move(argmax)](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    Matrix g = Matrix::Zero(px.value.rows(), px.value.cols());
    const Eigen::Index cols = g.cols();
    for (Eigen::Index r = 0; r < n.grad.rows(); ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) g(argmax[static_cast<std::size_t>(r * cols + c)], c) += n.grad(r, c);
    }
    px.accumulate(g);
  });
}

/// Column-wise mean over consecutive groups of `seg` rows.
inline Tensor segment_mean(const Tensor& x, Eigen::Index seg) {
  detail::require_segments("segment_mean", x, seg);
  const Eigen::Index groups = x.rows() / seg;
  Matrix out(groups, x.cols());
  for (Eigen::Index g = 0; g < groups; ++g) out.row(g) = x.value().middleRows(g * seg, seg).colwise().mean();
  return make_result(std::move(out), {x}, [seg](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    Matrix g(px.value.rows(), px.value.cols());
    const double inv = 1.0 / static_cast<double>(seg);
    for (Eigen::Index r = 0; r < n.grad.rows(); ++r) g.middleRows(r * seg, seg) = (n.grad.row(r) * inv).replicate(seg, 1);
    px.accumulate(g);
  });
}

/// Max over the point (row) axis.
inline Tensor max_pool(const Tensor& x) { return segment_max(x, x.rows()); }
/// Mean over the point (row) axis.
inline Tensor mean_pool(const Tensor& x) { return segment_mean(x, x.rows()); }

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return make_result(std::move(out), Shape{}, {x}, [](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    px.accumulate(Matrix::Constant(px.value.rows(), px.value.cols(), n.grad(0, 0)));
  });
}

inline Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  Matrix out(1, 1);
  out(0, 0) = x.value().sum() * inv;
  return make_result(std::move(out), Shape{}, {x}, [inv](detail::Node& n) {
    auto& px = detail::parent(n, 0);
    px.accumulate(Matrix::Constant(px.value.rows(), px.value.cols(), n.grad(0, 0) * inv));
  });
}

}  // namespace pct
