// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pct/augment.hpp"
#include "pct/checkpoint.hpp"
#include "pct/dataset.hpp"
#include "pct/losses.hpp"
#include "pct/metrics.hpp"
#include "pct/model.hpp"
#include "pct/optim.hpp"

namespace pct {

struct TrainConfig {
  std::size_t batch = 16;
  std::size_t epochs = 100;
  double lr = 0.01;
  double lr_min = 0.0;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double label_smoothing = 0.2;
  AugmentConfig augment;
  std::uint64_t seed = 1;
  std::string out_dir;  // empty: keep everything in memory
  bool unsigned_normals = false;
  std::vector<std::vector<int>> part_sets;  // per category; empty: taken from the data
};

/// Augmentation used when a task does not override it.
inline AugmentConfig default_augment(Task task) {
  AugmentConfig c;
  if (task == Task::segment) c.dropout = false;
  if (task == Task::normals) c = AugmentConfig::none();
  return c;
}

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double eval_metric = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_metric = 0.0;
  std::size_t best_epoch = 0;  // 0: initialization
};

/// Accuracy and pIoU grow, cosine error shrinks.
inline bool higher_is_better(Task t) { return t != Task::normals; }

/// Labels seen per category, sorted. Index = category.
inline std::vector<std::vector<int>> observed_part_sets(const std::vector<PointCloud>& clouds) {
  std::vector<std::set<int>> seen;
  for (const auto& c : clouds) {
    if (!c.labels) continue;
    const auto cat = static_cast<std::size_t>(c.category.value_or(0));
    if (seen.size() <= cat) seen.resize(cat + 1);
    seen[cat].insert(c.labels->begin(), c.labels->end());
  }
  std::vector<std::vector<int>> out;
  for (const auto& s : seen) out.emplace_back(s.begin(), s.end());
  return out;
}

namespace detail {

inline std::vector<const PointCloud*> batch_view(const std::vector<PointCloud>& clouds, const std::vector<std::size_t>& idx,
                                                 std::size_t begin, std::size_t end) {
  std::vector<const PointCloud*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&clouds[idx[i]]);
  return out;
}

inline std::vector<int> stacked_labels(const std::vector<const PointCloud*>& batch, Task task) {
  std::vector<int> out;
  for (const auto* c : batch) {
    if (task == Task::classify) {
      if (!c->category) throw ValidationError("train: cloud without a category in a classification set");
      out.push_back(*c->category);
    } else {
      if (!c->labels) throw ValidationError("train: cloud without part labels in a segmentation set");
      out.insert(out.end(), c->labels->begin(), c->labels->end());
    }
  }
  return out;
}

inline Matrix stacked_normals(const std::vector<const PointCloud*>& batch) {
  Eigen::Index rows = 0;
  for (const auto* c : batch) rows += c->coords.rows();
  Matrix out(rows, 3);
  Eigen::Index at = 0;
  for (const auto* c : batch) {
    if (!c->normals) throw ValidationError("train: cloud without normals in a normal-estimation set");
    out.middleRows(at, c->coords.rows()) = *c->normals;
    at += c->coords.rows();
  }
  return out;
}

}  // namespace detail

inline Tensor task_loss(const Tensor& scores, const std::vector<const PointCloud*>& batch, Task task,
                        double label_smoothing) {
  if (task == Task::normals) return cosine_loss(scores, detail::stacked_normals(batch));
  return soft_cross_entropy(scores, detail::stacked_labels(batch, task), label_smoothing);
}

/// Per-cloud predictions in inference mode, `batch` clouds per forward pass.
/// Returns one score matrix per cloud.
inline std::vector<Matrix> predict_all(PctModel& model, const std::vector<PointCloud>& clouds, std::size_t batch = 16) {
  const Mode before = model.mode();
  model.set_mode(Mode::inference);
  NoGradGuard no_grad;
  std::vector<std::size_t> idx(clouds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Matrix> out;
  const bool dense = model.config().dense();
  for (std::size_t b = 0; b < clouds.size(); b += batch) {
    const std::size_t e = std::min(clouds.size(), b + batch);
    const Matrix s = model.forward(detail::batch_view(clouds, idx, b, e)).value();
    Eigen::Index at = 0;
    for (std::size_t i = b; i < e; ++i) {
      const Eigen::Index rows = dense ? clouds[i].coords.rows() : 1;
      out.push_back(s.middleRows(at, rows));
      at += rows;
    }
  }
  model.set_mode(before);
  return out;
}

/// Task metric of per-cloud score matrices against the clouds' ground truth:
/// accuracy, mean part IoU, or average cosine error (predictions are scaled to
/// unit length first).
inline double score_predictions(const std::vector<Matrix>& scores, const std::vector<PointCloud>& clouds, Task task,
                                const std::vector<std::vector<int>>& part_sets, bool unsigned_normals = false) {
  if (scores.size() != clouds.size()) throw DimensionError("score_predictions: one score matrix per cloud expected");
  if (clouds.empty()) throw CountError("score_predictions: no clouds");
  if (task == Task::classify) {
    std::vector<int> pred, truth;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      pred.push_back(argmax_rows(scores[i]).front());
      truth.push_back(clouds[i].category.value_or(-1));
    }
    return accuracy(pred, truth);
  }
  if (task == Task::normals) {
    double total = 0.0;
    Eigen::Index count = 0;
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      const Matrix unit = normalize_normals(scores[i]).unit;
      total += avg_cosine_error(unit, *clouds[i].normals, unsigned_normals) * static_cast<double>(scores[i].rows());
      count += scores[i].rows();
    }
    return total / static_cast<double>(count);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    const auto cat = static_cast<std::size_t>(clouds[i].category.value_or(0));
    if (cat >= part_sets.size()) throw RangeError("score_predictions: no part set for category " + std::to_string(cat));
    total += shape_iou(argmax_in(scores[i], part_sets[cat]), *clouds[i].labels, part_sets[cat]);
  }
  return total / static_cast<double>(clouds.size());
}

inline double evaluate(PctModel& model, const std::vector<PointCloud>& clouds, const TrainConfig& cfg) {
  const Task task = model.config().head.task;
  auto parts = cfg.part_sets;
  if (task == Task::segment && parts.empty()) parts = observed_part_sets(clouds);
  return score_predictions(predict_all(model, clouds, cfg.batch), clouds, task, parts, cfg.unsigned_normals);
}

inline std::string format_epoch(const EpochLog& e) {
  std::ostringstream os;
  os.precision(9);
  os << e.epoch << ',' << e.lr << ',' << e.train_loss << ',' << e.eval_metric;
  return os.str();
}

/// Trains `model` on `train_set` and scores it on `eval_set` after every epoch.
/// With an output directory, `metrics.csv` grows by one line per epoch and
/// `checkpoint.bin` holds the best model seen so far (initially the
/// untrained one). A NaN loss aborts with NumericError; the checkpoint on
/// disk is left as it was.
inline TrainResult train(PctModel& model, const std::vector<PointCloud>& train_set,
                         const std::vector<PointCloud>& eval_set, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  namespace fs = std::filesystem;
  if (cfg.batch < 2) throw ValidationError("train.batch must be at least 2");
  if (train_set.size() < 2) throw CountError("train: needs at least 2 training clouds");
  if (eval_set.empty()) throw CountError("train: eval set is empty");
  const Task task = model.config().head.task;

  TrainConfig eval_cfg = cfg;
  if (task == Task::segment && eval_cfg.part_sets.empty()) {
    std::vector<PointCloud> all = train_set;
    all.insert(all.end(), eval_set.begin(), eval_set.end());
    eval_cfg.part_sets = observed_part_sets(all);
  }

  std::ofstream metrics;
  std::string ckpt;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    metrics.open(fs::path(cfg.out_dir) / "metrics.csv", std::ios::trunc);
    if (!metrics) throw FormatError("train: cannot write metrics.csv in " + cfg.out_dir);
    metrics << "epoch,lr,train_loss,eval_metric\n" << std::flush;
    ckpt = (fs::path(cfg.out_dir) / "checkpoint.bin").string();
    save_checkpoint(model.parameters(), ckpt);
  }

  Sgd sgd(model.parameters(), cfg.momentum, cfg.weight_decay);
  const Schedule schedule{cfg.lr, cfg.lr_min, static_cast<double>(cfg.epochs)};
  Rng data_rng(stream_seed(cfg.seed, 0xDA7A));
  TrainResult result;
  result.best_metric = higher_is_better(task) ? -INFINITY : INFINITY;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = cosine_lr(static_cast<double>(epoch - 1), schedule);
    model.set_mode(Mode::training);
    std::shuffle(order.begin(), order.end(), data_rng);
    double loss_total = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      const std::size_t e = std::min(order.size(), b + cfg.batch);
      if (e - b < 2) break;  // a lone cloud cannot be batch-normalized
      std::vector<PointCloud> augmented;
      augmented.reserve(e - b);
      for (std::size_t i = b; i < e; ++i) augmented.push_back(augment(train_set[order[i]], data_rng, cfg.augment));
      std::vector<const PointCloud*> view;
      for (const auto& c : augmented) view.push_back(&c);

      sgd.zero_grad();
      Tensor loss = task_loss(model.forward(view), view, task, cfg.label_smoothing);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw NumericError("train: loss became " + std::to_string(lv) + " at epoch " + std::to_string(epoch) +
                           (ckpt.empty() ? std::string() : "; last good checkpoint kept at " + ckpt));
      }
      loss.backward();
      sgd.step(lr);
      loss_total += lv * static_cast<double>(e - b);
      loss_count += e - b;
    }

    EpochLog log{epoch, lr, loss_total / static_cast<double>(std::max<std::size_t>(loss_count, 1)),
                 evaluate(model, eval_set, eval_cfg)};
    result.log.push_back(log);
    const bool better = higher_is_better(task) ? log.eval_metric > result.best_metric : log.eval_metric < result.best_metric;
    if (better) {
      result.best_metric = log.eval_metric;
      result.best_epoch = epoch;
      if (!ckpt.empty()) save_checkpoint(model.parameters(), ckpt);
    }
    if (metrics.is_open()) metrics << format_epoch(log) << '\n' << std::flush;
    if (on_epoch) on_epoch(log);
  }
  model.set_mode(Mode::inference);
  return result;
}

}  // namespace pct
