// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "pct/point_cloud.hpp"

namespace pct {

/// Writes a matrix as comma-separated rows, 9 significant digits.
inline void write_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.precision(9);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << m(i, j);
    }
    os << '\n';
  }
}

/// 8-bit pixel values, row-major: round(255 * a / max a).
inline std::vector<std::uint8_t> attention_pixels(const Matrix& map) {
  const double peak = map.maxCoeff();
  std::vector<std::uint8_t> px(static_cast<std::size_t>(map.size()));
  for (Eigen::Index i = 0; i < map.rows(); ++i) {
    for (Eigen::Index j = 0; j < map.cols(); ++j) {
      const double v = peak > 0.0 ? std::round(255.0 * map(i, j) / peak) : 0.0;
      px[static_cast<std::size_t>(i * map.cols() + j)] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return px;
}

/// Binary (P5) grayscale PGM of an attention map.
inline void write_attention_pgm(const Matrix& map, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "P5\n" << map.cols() << ' ' << map.rows() << "\n255\n";
  const auto px = attention_pixels(map);
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

/// CSV and PGM of the same map: `<stem>.csv`, `<stem>.pgm`.
inline void export_attention_map(const Matrix& map, const std::string& stem) {
  write_matrix_csv(map, stem + ".csv");
  write_attention_pgm(map, stem + ".pgm");
}

/// Per-point weights of one query row: `x,y,z,alpha` with a header line.
inline void write_query_attention(const PointCloud& cloud, const Matrix& map, Eigen::Index query,
                                  const std::string& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os.precision(9);
  os << "x,y,z,alpha\n";
  for (Eigen::Index j = 0; j < map.cols(); ++j) {
    os << cloud.coords(j, 0) << ',' << cloud.coords(j, 1) << ',' << cloud.coords(j, 2) << ',' << map(query, j)
       << '\n';
  }
}

}  // namespace pct
