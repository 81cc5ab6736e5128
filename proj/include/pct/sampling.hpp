// SPDX-License-Identifier: Apache-2.0
#pragma once

// Farthest point sampling and k-nearest-neighbor search.
//
// All tie-breaks use the canonical rank of a point: its position in the
// lexicographic (x, y, z) order of the cloud. Sums that feed a decision are
// accumulated in canonical order as well, so both kernels return the same
// coordinate set for any row permutation of the input.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "pct/tensor.hpp"

namespace pct {

using IndexMatrix = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double squared_distance(const Eigen::Ref<const RowVector>& a, const Eigen::Ref<const RowVector>& b) {
  const double dx = a(0) - b(0);
  const double dy = a(1) - b(1);
  const double dz = a(2) - b(2);
  return dx * dx + dy * dy + dz * dz;
}

/// Row indices sorted lexicographically by coordinates, ties by row index.
inline std::vector<Eigen::Index> canonical_order(const Matrix& coords) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(coords.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (int c = 0; c < coords.cols(); ++c) {
      if (coords(a, c) != coords(b, c)) return coords(a, c) < coords(b, c);
    }
    return false;
  });
  return order;
}

/// rank[i] = position of row i in canonical_order.
inline std::vector<Eigen::Index> canonical_rank(const Matrix& coords) {
  const auto order = canonical_order(coords);
  std::vector<Eigen::Index> rank(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) rank[static_cast<std::size_t>(order[pos])] = static_cast<Eigen::Index>(pos);
  return rank;
}

/// Greedy farthest point sampling. Starts from the point farthest from the
/// centroid and repeatedly adds the point with the largest distance to the
/// selected set. Returns row indices in selection order.
inline std::vector<Eigen::Index> farthest_point_sample(const Matrix& coords, std::size_t m) {
  const auto n = static_cast<std::size_t>(coords.rows());
  if (m < 1 || m > n) {
    throw CountError("farthest_point_sample: cannot select " + std::to_string(m) + " of " + std::to_string(n) +
                     " points");
  }
  const auto order = canonical_order(coords);
  std::vector<Eigen::Index> rank(n);
  for (std::size_t pos = 0; pos < n; ++pos) rank[static_cast<std::size_t>(order[pos])] = static_cast<Eigen::Index>(pos);

  RowVector centroid = RowVector::Zero(3);
  for (auto i : order) centroid += coords.row(i);
  centroid /= static_cast<double>(n);

  // Scanning in canonical order with a strict comparison keeps the smallest
  // rank among equal distances.
  Eigen::Index start = order.front();
  double best = -1.0;
  for (auto i : order) {
    const double d = squared_distance(coords.row(i), centroid);
    if (d > best) {
      best = d;
      start = i;
    }
  }

  std::vector<Eigen::Index> selected;
  selected.reserve(m);
  std::vector<char> taken(n, 0);
  std::vector<double> min_dist(n);
  selected.push_back(start);
  taken[static_cast<std::size_t>(start)] = 1;
  for (std::size_t i = 0; i < n; ++i) min_dist[i] = squared_distance(coords.row(static_cast<Eigen::Index>(i)), coords.row(start));

  while (selected.size() < m) {
    Eigen::Index next = -1;
    double far = -1.0;
    for (auto i : order) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (min_dist[static_cast<std::size_t>(i)] > far) {
        far = min_dist[static_cast<std::size_t>(i)];
        next = i;
      }
    }
    selected.push_back(next);
    taken[static_cast<std::size_t>(next)] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = squared_distance(coords.row(static_cast<Eigen::Index>(i)), coords.row(next));
      if (d < min_dist[i]) min_dist[i] = d;
    }
  }
  return selected;
}

/// For each query row, the k cloud rows nearest in Euclidean distance, sorted
/// by (distance, canonical rank). Result is [queries x k].
inline IndexMatrix knn(const Matrix& cloud, const Matrix& queries, std::size_t k) {
  const auto n = static_cast<std::size_t>(cloud.rows());
  if (k < 1 || k > n) {
    throw CountError("knn: cannot take " + std::to_string(k) + " neighbors from " + std::to_string(n) + " points");
  }
  const auto rank = canonical_rank(cloud);
  IndexMatrix out(queries.rows(), static_cast<Eigen::Index>(k));
  std::vector<double> dist(n);
  std::vector<Eigen::Index> idx(n);
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = squared_distance(cloud.row(static_cast<Eigen::Index>(i)), queries.row(q));
      idx[i] = static_cast<Eigen::Index>(i);
    }
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](Eigen::Index a, Eigen::Index b) {
                        const double da = dist[static_cast<std::size_t>(a)];
                        const double db = dist[static_cast<std::size_t>(b)];
                        if (da != db) return da < db;
                        return rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)];
                      });
    for (std::size_t j = 0; j < k; ++j) out(q, static_cast<Eigen::Index>(j)) = idx[j];
  }
  return out;
}

}  // namespace pct
