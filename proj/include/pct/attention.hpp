// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pct/layers.hpp"

namespace pct {

/// Self-attention (SA) or offset-attention (OA).
enum class AttentionKind { self, offset };

inline const char* to_string(AttentionKind k) { return k == AttentionKind::self ? "SA" : "OA"; }

/// Raw dot-product scores and the normalized attention weights of one cloud.
struct AttentionMap {
  Matrix raw;         // N x N, Q K^T
  Matrix normalized;  // N x N
};

/// Scaled row softmax: softmax over each row of raw / sqrt(d_a).
inline Tensor sa_normalize(const Tensor& raw, std::size_t d_a) {
  return softmax(affine(raw, 1.0 / std::sqrt(static_cast<double>(d_a))), Axis::rows);
}

/// Column softmax (over the first index, unscaled) followed by l1
/// normalization of each row.
inline Tensor oa_normalize(const Tensor& raw) { return l1_normalize_rows(softmax(raw, Axis::cols)); }

struct Qkv {
  Tensor q;  // N x d_a
  Tensor k;  // N x d_a
  Tensor v;  // N x d_e
};

/// One attention layer with bias-free query/key/value projections and an LBR
/// on the way out. Width-preserving: d_e in, d_e out.
class AttentionLayer {
 public:
  AttentionLayer() = default;

  /// `d_a == 0` selects d_e / 4.
  AttentionLayer(std::size_t d_e, AttentionKind kind, Rng& rng, std::size_t d_a = 0)
      : kind(kind), lbr(d_e, d_e, rng) {
    if (d_a == 0) {
      if (d_e % 4 != 0) {
        throw ValidationError("attention: d_e = " + std::to_string(d_e) + " is not divisible by 4");
      }
      d_a = d_e / 4;
    }
    w_q = Tensor::from(uniform_fan_in(d_e, d_a, rng), true);
    w_k = Tensor::from(uniform_fan_in(d_e, d_a, rng), true);
    w_v = Tensor::from(uniform_fan_in(d_e, d_e, rng), true);
  }

  std::size_t width() const { return static_cast<std::size_t>(w_v.rows()); }
  std::size_t key_width() const { return static_cast<std::size_t>(w_q.cols()); }

  Qkv project(const Tensor& f) const {
    if (static_cast<std::size_t>(f.cols()) != width()) {
      throw DimensionError("attention: input " + to_string(f.shape()) + " incompatible with W_q " +
                           to_string(w_q.shape()));
    }
    return {matmul(f, w_q), matmul(f, w_k), matmul(f, w_v)};
  }

  Tensor normalize(const Tensor& raw) const {
    return kind == AttentionKind::self ? sa_normalize(raw, key_width()) : oa_normalize(raw);
  }

  /// Attention features A V for a batch of equally sized clouds stacked by rows.
  Tensor attend(const Qkv& qkv, std::size_t batch) const {
    const Eigen::Index total = qkv.q.rows();
    if (batch == 0 || total % static_cast<Eigen::Index>(batch) != 0) {
      throw DimensionError("attention: " + std::to_string(total) + " rows do not split into " +
                           std::to_string(batch) + " clouds");
    }
    const Eigen::Index n = total / static_cast<Eigen::Index>(batch);
    if (batch == 1) return matmul(normalize(matmul_nt(qkv.q, qkv.k)), qkv.v);
    std::vector<Tensor> parts;
    parts.reserve(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const Eigen::Index begin = static_cast<Eigen::Index>(b) * n;
      const Tensor a = normalize(matmul_nt(slice_rows(qkv.q, begin, n), slice_rows(qkv.k, begin, n)));
      parts.push_back(matmul(a, slice_rows(qkv.v, begin, n)));
    }
    return vcat(parts);
  }

  /// SA: LBR(F_sa) + F_in.  OA: LBR(F_in - F_sa) + F_in.
  Tensor forward(const Tensor& f_in, std::size_t batch = 1) {
    const Tensor f_sa = attend(project(f_in), batch);
    const Tensor branch = kind == AttentionKind::self ? f_sa : sub(f_in, f_sa);
    return add(lbr.forward(branch), f_in);
  }

  /// Attention weights for a single cloud.
  AttentionMap attention_map(const Tensor& f_in) const {
    NoGradGuard no_grad;
    const Qkv qkv = project(f_in);
    const Tensor raw = matmul_nt(qkv.q, qkv.k);
    return {raw.value(), normalize(raw).value()};
  }

  /// max |(F_in - F_sa) - (I - A) F_in| using this layer's W_v. Zero up to
  /// rounding when W_v is the identity.
  double laplacian_residual(const Matrix& f_in) const {
    if (kind != AttentionKind::offset) throw ValidationError("laplacian_residual: requires an offset-attention layer");
    NoGradGuard no_grad;
    const Tensor f = Tensor::from(f_in);
    const Matrix a = attention_map(f).normalized;
    const Matrix f_sa = a * (f_in * w_v.value());
    const Matrix lhs = f_in - f_sa;
    const Matrix rhs = (Matrix::Identity(a.rows(), a.cols()) - a) * f_in;
    return (lhs - rhs).cwiseAbs().maxCoeff();
  }

  void set_mode(Mode m) { lbr.set_mode(m); }

  void collect(ParamList& out, const std::string& prefix) const {
    out.push_back({prefix + "w_q", w_q, true});
    out.push_back({prefix + "w_k", w_k, true});
    out.push_back({prefix + "w_v", w_v, true});
    lbr.collect(out, prefix + "lbr.");
  }

  AttentionKind kind = AttentionKind::offset;
  Tensor w_q;
  Tensor w_k;
  Tensor w_v;
  Lbr lbr;
};

}  // namespace pct
