// SPDX-License-Identifier: Apache-2.0
#pragma once

// Finite-difference checks for every layer type and each model variant at
// small sizes. BatchNorm runs in inference mode with randomized running
// statistics unless a case says otherwise; losses are sum(out * R) for a
// fixed random R so every output entry contributes.

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "pct/attention.hpp"
#include "pct/encoder.hpp"
#include "pct/gradcheck.hpp"
#include "pct/heads.hpp"
#include "pct/losses.hpp"
#include "pct/model.hpp"
#include "pct/sg_layer.hpp"

namespace pct {

struct GradCase {
  std::string name;
  double max_error = 0.0;
  double margin = 0.0;  // distance from the nearest relu / max switch
  int attempts = 0;     // instances drawn to reach the margin
};

namespace detail {

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

/// Random BatchNorm affine parameters and running statistics; random biases.
inline void scramble(const ParamList& params, Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::normal_distribution<double> g(0.0, 0.2);
  for (const auto& p : params) {
    Tensor t = p.tensor;
    Matrix& v = t.mutable_value();
    const auto ends = [&](const char* s) { return p.name.ends_with(s); };
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (ends("running_var") || ends("gamma")) {
        v.data()[i] = u(rng);
      } else if (ends("running_mean") || ends("beta") || ends("bias")) {
        v.data()[i] = g(rng);
      }
    }
  }
}

inline std::vector<Tensor> trainable_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) {
    if (p.trainable) out.push_back(p.tensor);
  }
  return out;
}

/// sum(y * R) with R drawn once per shape.
class Probe {
 public:
  explicit Probe(std::uint64_t seed) : rng_(seed) {}
  Tensor operator()(const Tensor& y) {
    if (r_.rows() != y.rows() || r_.cols() != y.cols()) r_ = gaussian(y.rows(), y.cols(), rng_);
    return sum(mul(y, Tensor::from(r_)));
  }

 private:
  Rng rng_;
  Matrix r_;
};

/// Moves every running statistic onto the batch statistics of `batch` so
/// that inference-mode features keep unit scale through the whole stack.
/// Variances are floored at `min_var`: a nearly constant channel would
/// otherwise be amplified by up to 1/sqrt(eps).
inline void calibrate_batch_norm(PctModel& model, const std::vector<const PointCloud*>& batch, double min_var,
                                 int rounds = 200) {
  NoGradGuard no_grad;
  model.set_mode(Mode::training);
  for (int r = 0; r < rounds; ++r) model.forward(batch);
  model.set_mode(Mode::inference);
  for (const auto& p : model.parameters()) {
    if (!p.name.ends_with("running_var")) continue;
    Tensor t = p.tensor;
    t.mutable_value() = t.value().cwiseMax(min_var);
  }
}

}  // namespace detail

inline constexpr Eigen::Index kGradcheckPoints = 8;

/// Small model used by the full-model checks: N = 8, d_e = 8.
inline ModelConfig gradcheck_model(Variant v, Task task) {
  ModelConfig c;
  c.encoder.variant = v;
  c.encoder.d_e = 8;
  c.encoder.embed_width = 4;
  c.encoder.d_o = 16;
  c.encoder.n_attention_layers = 2;
  if (uses_neighbor_embedding(v)) {
    const bool dense = task != Task::classify;
    c.encoder.sg_schedule = {{dense ? 0u : 4u, 3, 8}, {dense ? 0u : 2u, 2, 8}};
    if (v == Variant::pct3l) c.encoder.sg_schedule.push_back({dense ? 0u : 2u, 2, 8});
  }
  c.head.task = task;
  c.head.widths = {8, 8};
  c.head.n_outputs = task == Task::normals ? 3 : 4;
  c.head.n_categories = 3;
  c.head.category_width = 4;
  c.head.dropout = 0.0;
  return c;
}

struct GradSuiteOptions {
  std::uint64_t seed = 7;
  double eps = 3e-5;
  double min_margin = 1e-3;  // see SmoothnessMargin
  int max_attempts = 200;
};

/// A scalar function, the leaves to differentiate, and whatever must outlive them.
struct GradInstance {
  std::function<Tensor()> f;
  std::vector<Tensor> wrt;
  std::shared_ptr<void> keep;
};

/// Draws instances until one sits at least `min_margin` away from every relu
/// and max-pool switch, then checks it.
inline GradCase check_case(const std::string& name, const std::function<GradInstance(Rng&)>& make, Rng& rng,
                           const GradSuiteOptions& opt) {
  GradCase out;
  out.name = name;
  GradInstance inst;
  for (out.attempts = 1;; ++out.attempts) {
    inst = make(rng);
    MarginMonitor monitor;
    {
      NoGradGuard no_grad;
      inst.f();
    }
    out.margin = monitor.margin().min();
    if (out.margin >= opt.min_margin || out.attempts >= opt.max_attempts) break;
  }
  out.max_error = gradcheck_all(inst.f, inst.wrt, opt.eps);
  return out;
}

inline std::vector<GradCase> run_grad_suites(const GradSuiteOptions& opt = {}) {
  using detail::gaussian;
  std::vector<GradCase> out;
  Rng rng(opt.seed);
  const Eigen::Index n = 16;
  auto add = [&](const std::string& name, const std::function<GradInstance(Rng&)>& make) {
    out.push_back(check_case(name, make, rng, opt));
  };

  add("linear", [&](Rng& r) {
    auto lin = std::make_shared<Linear>(6, 5, true, r);
    ParamList p;
    lin->collect(p, "");
    detail::scramble(p, r);
    Tensor x = Tensor::from(gaussian(n, 6, r), true);
    auto probe = std::make_shared<detail::Probe>(r());
    return GradInstance{[=] { return (*probe)(lin->forward(x)); }, {x, lin->weight, lin->bias}, lin};
  });
  for (const Mode mode : {Mode::training, Mode::inference}) {
    add(mode == Mode::training ? "batchnorm.train" : "batchnorm.eval", [&, mode](Rng& r) {
      auto bn = std::make_shared<BatchNorm>(5);
      ParamList p;
      bn->collect(p, "");
      detail::scramble(p, r);
      Tensor x = Tensor::from(gaussian(n, 5, r), true);
      auto probe = std::make_shared<detail::Probe>(r());
      return GradInstance{[=] { return (*probe)(bn->forward(x, mode)); }, {x, bn->gamma, bn->beta}, bn};
    });
  }
  add("lbrd.train", [&](Rng& r) {
    auto lbr = std::make_shared<Lbr>(6, 5, r, 0.5);
    ParamList p;
    lbr->collect(p, "");
    detail::scramble(p, r);
    lbr->set_mode(Mode::training);
    Tensor x = Tensor::from(gaussian(n, 6, r), true);
    auto probe = std::make_shared<detail::Probe>(r());
    const std::uint64_t mask_seed = r();
    // The linear bias is left out: batch statistics cancel it, so its exact
    // gradient is zero and only rounding noise would be compared. A fresh
    // generator per call keeps the dropout mask fixed.
    return GradInstance{[=] {
                          Rng mask(mask_seed);
                          return (*probe)(lbr->forward(x, mask));
                        },
                        {lbr->linear.weight, lbr->bn.gamma, lbr->bn.beta, x}, lbr};
  });

  using UnaryOp = std::function<Tensor(const Tensor&)>;
  const std::vector<std::pair<std::string, UnaryOp>> unary = {
      {"relu", [](const Tensor& x) { return relu(x); }},
      {"softmax.rows", [](const Tensor& x) { return softmax(x, Axis::rows); }},
      {"softmax.cols", [](const Tensor& x) { return softmax(x, Axis::cols); }},
      {"log_softmax", [](const Tensor& x) { return log_softmax_rows(x); }},
      {"sa_normalize", [](const Tensor& x) { return sa_normalize(x, 4); }},
      {"oa_normalize", [](const Tensor& x) { return oa_normalize(x); }},
      {"l2_normalize", [](const Tensor& x) { return l2_normalize_rows(x); }},
      {"segment_max+mean", [](const Tensor& x) { return hcat({segment_max(x, 4), segment_mean(x, 4)}); }},
      {"l1_normalize", [](const Tensor& x) { return l1_normalize_rows(affine(mul(x, x), 1.0, 0.1)); }},
  };
  for (const auto& [name, op] : unary) {
    add(name, [&, op = op](Rng& r) {
      Tensor x = Tensor::from(gaussian(n, 5, r), true);
      auto probe = std::make_shared<detail::Probe>(r());
      return GradInstance{[=] { return (*probe)(op(x)); }, {x}, nullptr};
    });
  }

  for (const AttentionKind kind : {AttentionKind::self, AttentionKind::offset}) {
    add(std::string("attention.") + to_string(kind), [&, kind](Rng& r) {
      auto layer = std::make_shared<AttentionLayer>(8, kind, r);
      ParamList p;
      layer->collect(p, "");
      detail::scramble(p, r);
      layer->set_mode(Mode::inference);
      Tensor x = Tensor::from(gaussian(2 * n, 8, r), true);
      auto probe = std::make_shared<detail::Probe>(r());
      std::vector<Tensor> wrt = detail::trainable_of(p);
      wrt.push_back(x);
      return GradInstance{[=] { return (*probe)(layer->forward(x, 2)); }, wrt, layer};
    });
  }
  add("sg_layer", [&](Rng& r) {
    auto sg = std::make_shared<SgLayer>(4, SgStage{8, 4, 6}, r);
    ParamList p;
    sg->collect(p, "");
    detail::scramble(p, r);
    sg->set_mode(Mode::inference);
    const Matrix coords = gaussian(2 * n, 3, r);
    Tensor x = Tensor::from(gaussian(2 * n, 4, r), true);
    auto probe = std::make_shared<detail::Probe>(r());
    std::vector<Tensor> wrt = detail::trainable_of(p);
    wrt.push_back(x);
    return GradInstance{[=] { return (*probe)(sg->forward(coords, x, 2).features); }, wrt, sg};
  });
  add("soft_cross_entropy", [&](Rng& r) {
    Tensor s = Tensor::from(gaussian(n, 5, r), true);
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(static_cast<int>(i % 5));
    return GradInstance{[=] { return soft_cross_entropy(s, labels, 0.2); }, {s}, nullptr};
  });
  add("cosine_loss", [&](Rng& r) {
    Matrix gt = gaussian(n, 3, r);
    gt.rowwise().normalize();
    Tensor pr = Tensor::from(gaussian(n, 3, r), true);
    return GradInstance{[=] { return cosine_loss(pr, gt); }, {pr}, nullptr};
  });

  const std::vector<std::pair<Variant, Task>> models = {
      {Variant::npct, Task::classify}, {Variant::spct, Task::classify}, {Variant::pct, Task::classify},
      {Variant::pct3l, Task::classify}, {Variant::pct, Task::segment},  {Variant::pct, Task::normals}};
  constexpr double kMinVar = 0.1;
  for (const auto& [variant, task] : models) {
    add("model." + to_string(variant) + "." + to_string(task), [&, variant = variant, task = task](Rng& r) {
      struct Holder {
        std::unique_ptr<PctModel> model;
        std::vector<PointCloud> clouds;
        std::vector<const PointCloud*> batch;
      };
      auto h = std::make_shared<Holder>();
      h->model = std::make_unique<PctModel>(gradcheck_model(variant, task), r());
      const ParamList params = h->model->parameters();
      detail::scramble(params, r);
      h->clouds.resize(2);
      for (std::size_t b = 0; b < 2; ++b) {
        h->clouds[b].coords = gaussian(kGradcheckPoints, 3, r);
        h->clouds[b].category = static_cast<int>(b);
      }
      h->batch = {&h->clouds[0], &h->clouds[1]};
      detail::calibrate_batch_norm(*h->model, h->batch, kMinVar);
      auto probe = std::make_shared<detail::Probe>(r());
      return GradInstance{[h, probe] { return (*probe)(h->model->forward(h->batch)); }, detail::trainable_of(params), h};
    });
  }
  return out;
}

}  // namespace pct
