// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pct/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pct {

/// Row-major dense matrix of doubles. Every tensor stores its values as one.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

namespace detail {

struct Node {
  Matrix value;
  Matrix grad;  // empty until first accumulation
  Shape shape;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }

  void accumulate(const Eigen::Ref<const Matrix>& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// RAII switch that stops graph construction on the current thread.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Caps the worker count used by matrix kernels. Zero reads PCT_THREADS from
/// the environment and falls back to the hardware default.
inline void set_num_threads(int n) {
  if (n <= 0) {
    if (const char* env = std::getenv("PCT_THREADS")) n = std::atoi(env);
  }
  if (n > 0) {
    Eigen::setNbThreads(n);
#ifdef _OPENMP
    omp_set_num_threads(n);
#endif
  }
}

/// Dense tensor of rank 0, 1 or 2 taking part in a reverse-mode
/// differentiation graph.
///
/// A Tensor is a cheap handle; copies alias the same storage. Rank-1 tensors
/// are stored as a single row and rank-0 tensors as a 1x1 matrix, so every
/// kernel works on a Matrix.
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Matrix values, bool requires_grad = false) {
    Shape shape{static_cast<std::size_t>(values.rows()), static_cast<std::size_t>(values.cols())};
    return from(std::move(values), std::move(shape), requires_grad);
  }

  static Tensor from(Matrix values, Shape shape, bool requires_grad) {
    std::size_t count = 1;
    for (auto e : shape) count *= e;
    if (count != static_cast<std::size_t>(values.size())) {
      throw DimensionError("tensor: shape " + to_string(shape) + " does not hold " +
                           std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<detail::Node>();
    node->value = std::move(values);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
    return from(Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
                requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return from(std::move(m), Shape{}, requires_grad);
  }

  static Tensor vector(const RowVector& v, bool requires_grad = false) {
    Matrix m = v;
    return from(std::move(m), Shape{static_cast<std::size_t>(v.size())}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }

  const Matrix& value() const { return node_->value; }
  /// Direct write access for optimizers and initializers. Do not use while a
  /// graph that reads this tensor is awaiting backward.
  Matrix& mutable_value() { return node_->value; }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }

  double item() const {
    if (size() != 1) throw DimensionError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
    return node_->value(0, 0);
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }

  /// Gradient accumulated so far; zeros when nothing has been accumulated.
  Matrix grad() const {
    if (has_grad()) return node_->grad;
    return Matrix::Zero(rows(), cols());
  }

  void zero_grad() { node_->grad.resize(0, 0); }

  /// Copy of the values cut from the graph.
  Tensor detach() const { return from(node_->value, node_->shape, false); }

  /// Accumulates d(this)/d(leaf) into every reachable leaf requiring a gradient.
  /// Interior gradients are recomputed from scratch on each call, so leaves see
  /// exactly one additional contribution per call.
  void backward() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  bool same_as(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  friend Tensor make_result(Matrix value, std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward);
  friend Tensor make_result(Matrix value, Shape shape, std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward);

  std::shared_ptr<detail::Node> node_;
};

/// Creates an op output. The backward closure is kept only when grad mode is
/// on and at least one parent requires a gradient.
inline Tensor make_result(Matrix value, Shape shape, std::vector<Tensor> parents,
                          std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

inline Tensor make_result(Matrix value, std::vector<Tensor> parents,
                          std::function<void(detail::Node&)> backward) {
  Shape shape{static_cast<std::size_t>(value.rows()), static_cast<std::size_t>(value.cols())};
  return make_result(std::move(value), std::move(shape), std::move(parents), std::move(backward));
}

inline void Tensor::backward() const {
  if (size() != 1) {
    throw DimensionError("backward: seed must be a scalar, got shape " + to_string(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->is_leaf()) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  }
  node_->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward(**it);
  }
}

}  // namespace pct
