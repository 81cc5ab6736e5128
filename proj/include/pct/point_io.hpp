// SPDX-License-Identifier: Apache-2.0
#pragma once

// Plain-text point files. One point per line:
//
//   x y z [nx ny nz] [label]
//
// Whitespace separated, '#' starts a comment, blank lines are skipped. Every
// data line in a file must have the same number of columns (3, 4, 6 or 7).

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "pct/point_cloud.hpp"

namespace pct {

namespace detail {

inline double parse_number(const std::string& tok, std::size_t line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size()) throw ParseError("line " + std::to_string(line) + ": '" + tok + "' is not a number");
  return v;
}

}  // namespace detail

inline PointCloud parse_points(std::istream& is, const std::string& origin = "<stream>") {
  std::vector<std::vector<double>> rows;
  std::size_t columns = 0;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    for (std::string tok; ls >> tok;) row.push_back(detail::parse_number(tok, line_no));
    if (row.empty()) continue;
    if (row.size() != 3 && row.size() != 4 && row.size() != 6 && row.size() != 7) {
      throw ParseError(origin + ": line " + std::to_string(line_no) + ": expected 3, 4, 6 or 7 columns, got " +
                       std::to_string(row.size()));
    }
    if (columns == 0) columns = row.size();
    if (row.size() != columns) {
      throw FormatError(origin + ": line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                        " columns, earlier lines have " + std::to_string(columns));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(origin + ": no points");

  const auto n = static_cast<Eigen::Index>(rows.size());
  const bool has_normals = columns >= 6;
  const bool has_labels = columns == 4 || columns == 7;
  PointCloud cloud;
  cloud.coords.resize(n, 3);
  if (has_normals) cloud.normals = Matrix(n, 3);
  if (has_labels) cloud.labels = std::vector<int>(rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (int c = 0; c < 3; ++c) cloud.coords(i, c) = r[static_cast<std::size_t>(c)];
    if (has_normals) {
      for (int c = 0; c < 3; ++c) (*cloud.normals)(i, c) = r[static_cast<std::size_t>(3 + c)];
    }
    if (has_labels) {
      const double l = r.back();
      if (l != static_cast<double>(static_cast<int>(l))) {
        throw ParseError(origin + ": label " + std::to_string(l) + " of point " + std::to_string(i) + " is not an integer");
      }
      (*cloud.labels)[static_cast<std::size_t>(i)] = static_cast<int>(l);
    }
  }
  return cloud;
}

inline PointCloud load_points(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  return parse_points(is, path);
}

inline void write_points(std::ostream& os, const PointCloud& cloud) {
  os << std::setprecision(9);
  for (Eigen::Index i = 0; i < cloud.coords.rows(); ++i) {
    os << cloud.coords(i, 0) << ' ' << cloud.coords(i, 1) << ' ' << cloud.coords(i, 2);
    if (cloud.normals) {
      os << ' ' << (*cloud.normals)(i, 0) << ' ' << (*cloud.normals)(i, 1) << ' ' << (*cloud.normals)(i, 2);
    }
    if (cloud.labels) os << ' ' << (*cloud.labels)[static_cast<std::size_t>(i)];
    os << '\n';
  }
}

inline void save_points(const PointCloud& cloud, const std::string& path) {
  if (cloud.coords.rows() < 1) throw ValidationError("save_points: cloud is empty");
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_points(os, cloud);
  if (!os) throw FormatError("write to " + path + " failed");
}

}  // namespace pct
