// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pct/attention.hpp"
#include "pct/sg_layer.hpp"

namespace pct {

/// NPCT: point embedding + self-attention. SPCT: point embedding +
/// offset-attention. PCT: neighbor embedding + offset-attention, with two SG
/// stages (PCT) or three (PCT-3L).
enum class Variant { npct, spct, pct, pct3l };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::npct: return "npct";
    case Variant::spct: return "spct";
    case Variant::pct: return "pct";
    case Variant::pct3l: return "pct3l";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "npct") return Variant::npct;
  if (s == "spct") return Variant::spct;
  if (s == "pct") return Variant::pct;
  if (s == "pct3l") return Variant::pct3l;
  throw ValidationError("model: unknown variant '" + s + "' (expected npct|spct|pct|pct3l)");
}

inline bool uses_neighbor_embedding(Variant v) { return v == Variant::pct || v == Variant::pct3l; }

struct EncoderConfig {
  Variant variant = Variant::pct;
  std::size_t d_e = 128;          // attention width for npct/spct
  std::size_t embed_width = 64;   // pointwise LBR width in front of the SG stages
  std::vector<SgStage> sg_schedule;
  std::size_t n_attention_layers = 4;
  std::size_t d_o = 1024;
  std::size_t d_a = 0;  // 0 selects d_e / 4

  /// Width shared by all attention layers.
  std::size_t attention_width() const {
    return uses_neighbor_embedding(variant) ? sg_schedule.back().channels : d_e;
  }

  void validate() const {
    if (n_attention_layers < 1) throw ValidationError("encoder.n_attention_layers: must be >= 1");
    if (d_o < 1) throw ValidationError("encoder.d_o: must be >= 1");
    if (variant == Variant::pct && sg_schedule.size() != 2) {
      throw ValidationError("encoder.sg_schedule: pct needs exactly 2 SG stages, got " +
                            std::to_string(sg_schedule.size()));
    }
    if (variant == Variant::pct3l && sg_schedule.size() != 3) {
      throw ValidationError("encoder.sg_schedule: pct3l needs exactly 3 SG stages, got " +
                            std::to_string(sg_schedule.size()));
    }
    for (const auto& s : sg_schedule) {
      if (s.k < 1 || s.channels < 1) throw ValidationError("encoder.sg_schedule: k and channels must be >= 1");
    }
  }
};

/// SG schedule that halves then quarters the input (1024 -> 512 -> 256), k = 32,
/// widths 128 then 256. The three-stage form appends (n unchanged, 32, 512).
inline std::vector<SgStage> classification_schedule(std::size_t n_points, bool three_stage = false) {
  std::vector<SgStage> s{{n_points / 2, 32, 128}, {n_points / 4, 32, 256}};
  if (three_stage) s.push_back({n_points / 4, 32, 512});
  return s;
}

/// Size-preserving schedule for per-point tasks.
inline std::vector<SgStage> dense_schedule(bool three_stage = false) {
  std::vector<SgStage> s{{0, 32, 128}, {0, 32, 256}};
  if (three_stage) s.push_back({0, 32, 512});
  return s;
}

/// Reference widths: d_e = 128 for point embedding, SG widths 64 -> 128 -> 256
/// for neighbor embedding, d_o = 1024.
inline EncoderConfig paper_encoder(Variant v, bool dense, std::size_t n_points = 1024) {
  EncoderConfig c;
  c.variant = v;
  if (uses_neighbor_embedding(v)) {
    const bool three = v == Variant::pct3l;
    c.sg_schedule = dense ? dense_schedule(three) : classification_schedule(n_points, three);
  }
  return c;
}

/// Reduced widths for single-core training runs.
inline EncoderConfig desk_encoder(Variant v, bool dense, std::size_t n_points = 256) {
  EncoderConfig c;
  c.variant = v;
  c.d_e = 64;
  c.embed_width = 32;
  c.d_o = 256;
  if (uses_neighbor_embedding(v)) {
    const std::size_t k = 16;
    if (dense) {
      c.sg_schedule = {{0, k, 64}, {0, k, 64}};
      if (v == Variant::pct3l) c.sg_schedule.push_back({0, k, 128});
    } else {
      c.sg_schedule = {{n_points / 2, k, 64}, {n_points / 4, k, 64}};
      if (v == Variant::pct3l) c.sg_schedule.push_back({n_points / 4, k, 128});
    }
  }
  return c;
}

/// Two cascaded LBRs applied to every point: 3 -> width -> width.
class PointEmbedding {
 public:
  PointEmbedding() = default;
  PointEmbedding(std::size_t width, Rng& rng) : lbr1(3, width, rng), lbr2(width, width, rng) {}

  Tensor forward(const Tensor& coords) { return lbr2.forward(lbr1.forward(coords)); }

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
};

/// Embedded features plus the point set they belong to.
struct Embedding {
  Tensor features;                    // (batch * n) x width
  Matrix coords;                      // (batch * n) x 3
  std::vector<Eigen::Index> source;   // per-cloud input row of each output row
  std::size_t batch = 1;
  std::size_t points = 0;             // per cloud
};

/// Pointwise LBR pair followed by SG stages, each sampling from the previous
/// stage's output cloud.
class NeighborEmbedding {
 public:
  NeighborEmbedding() = default;
  NeighborEmbedding(std::size_t width, const std::vector<SgStage>& schedule, Rng& rng) : points(width, rng) {
    std::size_t in = width;
    for (const auto& s : schedule) {
      stages.emplace_back(in, s, rng);
      in = s.channels;
    }
  }

  Embedding forward(const Matrix& coords, std::size_t batch) {
    const std::size_t n = static_cast<std::size_t>(coords.rows()) / batch;
    Embedding e;
    e.features = points.forward(Tensor::from(coords));
    e.coords = coords;
    e.batch = batch;
    e.points = n;
    e.source.resize(batch * n);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < n; ++i) e.source[b * n + i] = static_cast<Eigen::Index>(i);
    }
    for (auto& stage : stages) {
      const std::size_t m = stage.output_points(e.points);
      if (m > e.points) {
        throw CountError("neighbor_embed: stage samples " + std::to_string(m) + " of " + std::to_string(e.points) +
                         " points");
      }
      auto out = stage.forward(e.coords, e.features, batch);
      std::vector<Eigen::Index> source(batch * m);
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t s = 0; s < m; ++s) {
          source[b * m + s] = e.source[b * e.points + static_cast<std::size_t>(out.sampled[b * m + s])];
        }
      }
      e.features = out.features;
      e.coords = std::move(out.coords);
      e.source = std::move(source);
      e.points = m;
    }
    return e;
  }

  void set_mode(Mode m) {
    points.set_mode(m);
    for (auto& s : stages) s.set_mode(m);
  }
  void collect(ParamList& out, const std::string& prefix) const {
    points.collect(out, prefix);
    for (std::size_t i = 0; i < stages.size(); ++i) stages[i].collect(out, prefix + "sg" + std::to_string(i) + ".");
  }

  PointEmbedding points;
  std::vector<SgLayer> stages;
};

/// Input embedding, stacked attention layers, concatenation and W_o.
class Encoder {
 public:
  Encoder() = default;
  Encoder(EncoderConfig config, Rng& rng) : config_(std::move(config)) {
    config_.validate();
    if (uses_neighbor_embedding(config_.variant)) {
      neighbor = NeighborEmbedding(config_.embed_width, config_.sg_schedule, rng);
    } else {
      point = PointEmbedding(config_.d_e, rng);
    }
    const std::size_t d = config_.attention_width();
    const AttentionKind kind = config_.variant == Variant::npct ? AttentionKind::self : AttentionKind::offset;
    for (std::size_t i = 0; i < config_.n_attention_layers; ++i) layers.emplace_back(d, kind, rng, config_.d_a);
    w_o = Tensor::from(uniform_fan_in(d * config_.n_attention_layers, config_.d_o, rng), true);
  }

  const EncoderConfig& config() const { return config_; }

  Embedding embed(const Matrix& coords, std::size_t batch) {
    if (batch == 0 || coords.rows() % static_cast<Eigen::Index>(batch) != 0 || coords.cols() != 3) {
      throw DimensionError("encoder: coordinates of shape [" + std::to_string(coords.rows()) + ", " +
                           std::to_string(coords.cols()) + "] do not form " + std::to_string(batch) + " clouds");
    }
    if (uses_neighbor_embedding(config_.variant)) return neighbor.forward(coords, batch);
    Embedding e;
    e.features = point.forward(Tensor::from(coords));
    e.coords = coords;
    e.batch = batch;
    e.points = static_cast<std::size_t>(coords.rows()) / batch;
    e.source.resize(static_cast<std::size_t>(coords.rows()));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < e.points; ++i) e.source[b * e.points + i] = static_cast<Eigen::Index>(i);
    }
    return e;
  }

  /// F_1 = AT^1(F_e), F_i = AT^i(F_{i-1}); F_o = concat(F_1..F_L) W_o.
  /// `layer_inputs`, when given, receives the input of every attention layer.
  Tensor encode(const Tensor& fe, std::size_t batch, std::vector<Tensor>* layer_inputs = nullptr) {
    if (static_cast<std::size_t>(fe.cols()) != config_.attention_width()) {
      throw DimensionError("encode: features " + to_string(fe.shape()) + " but attention width is " +
                           std::to_string(config_.attention_width()));
    }
    std::vector<Tensor> outs;
    outs.reserve(layers.size());
    Tensor f = fe;
    for (auto& layer : layers) {
      if (layer_inputs) layer_inputs->push_back(f);
      f = layer.forward(f, batch);
      outs.push_back(f);
    }
    return matmul(outs.size() == 1 ? outs.front() : hcat(outs), w_o);
  }

  void set_mode(Mode m) {
    if (uses_neighbor_embedding(config_.variant)) {
      neighbor.set_mode(m);
    } else {
      point.set_mode(m);
    }
    for (auto& l : layers) l.set_mode(m);
  }

  void collect(ParamList& out, const std::string& prefix) const {
    if (uses_neighbor_embedding(config_.variant)) {
      neighbor.collect(out, prefix + "embed.");
    } else {
      point.collect(out, prefix + "embed.");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(out, prefix + "attention" + std::to_string(i) + ".");
    out.push_back({prefix + "w_o", w_o, true});
  }

  PointEmbedding point;
  NeighborEmbedding neighbor;
  std::vector<AttentionLayer> layers;
  Tensor w_o;

 private:
  EncoderConfig config_;
};

/// concat(column max, column mean) over the `points` rows of each cloud.
inline Tensor global_feature(const Tensor& f_o, std::size_t points) {
  if (points < 1) throw CountError("global_feature: needs at least one point");
  const auto n = static_cast<Eigen::Index>(points);
  return hcat({segment_max(f_o, n), segment_mean(f_o, n)});
}

}  // namespace pct
