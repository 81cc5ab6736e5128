// SPDX-License-Identifier: Apache-2.0
#pragma once

// Parametric surface sampler used to build synthetic datasets.
//
// Every shape is centered on its bounding box in the local frame; the pose
// is applied afterwards. Size parameters and part labels per kind:
//
//   sphere   {radius}                              0 upper (z >= 0), 1 lower
//   cube     {side} or {sx, sy, sz}                face 0..5 = +x -x +y -y +z -z
//   cylinder {radius, height}                      0 side, 1 top, 2 bottom
//   cone     {radius, height}                      0 lateral, 1 base
//   torus    {major radius, minor radius}          0 outer half, 1 inner half
//   plane    {width, depth}                        0
//   pyramid  {base side, height}                   0 sides, 1 base
//   helix    {coil radius, pitch, turns, tube}     0 first half of the turns, 1 second

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pct/layers.hpp"
#include "pct/point_cloud.hpp"

namespace pct {

enum class ShapeKind { sphere, cube, cylinder, cone, torus, plane, pyramid, helix };

inline constexpr std::array<ShapeKind, 8> kAllShapeKinds = {ShapeKind::sphere, ShapeKind::cube,  ShapeKind::cylinder,
                                                            ShapeKind::cone,   ShapeKind::torus, ShapeKind::plane,
                                                            ShapeKind::pyramid, ShapeKind::helix};

inline std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::cone: return "cone";
    case ShapeKind::torus: return "torus";
    case ShapeKind::plane: return "plane";
    case ShapeKind::pyramid: return "pyramid";
    case ShapeKind::helix: return "helix";
  }
  return "?";
}

inline ShapeKind parse_shape_kind(const std::string& s) {
  for (auto k : kAllShapeKinds) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("shape: unknown kind '" + s + "'");
}

/// Part labels a kind can produce.
inline std::vector<int> part_set(ShapeKind k) {
  switch (k) {
    case ShapeKind::sphere: return {0, 1};
    case ShapeKind::cube: return {0, 1, 2, 3, 4, 5};
    case ShapeKind::cylinder: return {0, 1, 2};
    case ShapeKind::cone: return {0, 1};
    case ShapeKind::torus: return {0, 1};
    case ShapeKind::plane: return {0};
    case ShapeKind::pyramid: return {0, 1};
    case ShapeKind::helix: return {0, 1};
  }
  return {};
}

struct ShapeSpec {
  ShapeKind kind = ShapeKind::sphere;
  std::vector<double> size{1.0};
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::RowVector3d translation = Eigen::RowVector3d::Zero();
  std::size_t points = 256;
  double noise = 0.0;  // std. dev. along the normal, as a fraction of the bbox diagonal
};

namespace detail {

inline void require_sizes(const ShapeSpec& s, std::initializer_list<std::size_t> counts) {
  bool ok = false;
  for (auto c : counts) ok = ok || s.size.size() == c;
  if (!ok) throw ValidationError("shape: wrong number of size parameters for " + to_string(s.kind));
  for (double v : s.size) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("shape: size parameters of " + to_string(s.kind) + " must be positive");
  }
}

struct Sample {
  Eigen::RowVector3d p;
  Eigen::RowVector3d n;
  int label;
};

inline Sample triangle_sample(const Eigen::RowVector3d& a, const Eigen::RowVector3d& b, const Eigen::RowVector3d& c,
                              const Eigen::RowVector3d& outward_hint, int label, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r1 = std::sqrt(u(rng));
  const double r2 = u(rng);
  Eigen::RowVector3d p = (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c;
  Eigen::RowVector3d n = (b - a).cross(c - a).normalized();
  if (n.dot(outward_hint) < 0) n = -n;
  return {p, n, label};
}

}  // namespace detail

/// Uniform area-weighted surface sample with analytic normals and part labels.
inline PointCloud generate_shape(const ShapeSpec& spec, Rng& rng) {
  if (spec.points < 8) throw ValidationError("shape: needs at least 8 points");
  if (spec.noise < 0.0) throw ValidationError("shape: noise must be non-negative");
  constexpr double pi = std::numbers::pi;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(spec.points);

  PointCloud cloud;
  cloud.coords.resize(n, 3);
  cloud.normals = Matrix(n, 3);
  cloud.labels = std::vector<int>(spec.points);

  // Picks a region index with probability proportional to its area.
  auto pick = [&](const std::vector<double>& areas) {
    std::discrete_distribution<int> d(areas.begin(), areas.end());
    return d(rng);
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    detail::Sample s{};
    switch (spec.kind) {
      case ShapeKind::sphere: {
        detail::require_sizes(spec, {1});
        const double r = spec.size[0];
        Eigen::RowVector3d d(gauss(rng), gauss(rng), gauss(rng));
        d.normalize();
        s = {r * d, d, d(2) >= 0 ? 0 : 1};
        break;
      }
      case ShapeKind::cube: {
        detail::require_sizes(spec, {1, 3});
        const Eigen::RowVector3d half = spec.size.size() == 1
                                            ? Eigen::RowVector3d::Constant(spec.size[0] / 2)
                                            : Eigen::RowVector3d(spec.size[0] / 2, spec.size[1] / 2, spec.size[2] / 2);
        const double ax = 4 * half(1) * half(2), ay = 4 * half(0) * half(2), az = 4 * half(0) * half(1);
        const int face = pick({ax, ax, ay, ay, az, az});
        const int axis = face / 2;
        const double sign = face % 2 == 0 ? 1.0 : -1.0;
        Eigen::RowVector3d p;
        for (int c = 0; c < 3; ++c) p(c) = (2 * u(rng) - 1) * half(c);
        p(axis) = sign * half(axis);
        Eigen::RowVector3d nrm = Eigen::RowVector3d::Zero();
        nrm(axis) = sign;
        s = {p, nrm, face};
        break;
      }
      case ShapeKind::cylinder: {
        detail::require_sizes(spec, {2});
        const double r = spec.size[0], h = spec.size[1];
        const int region = pick({2 * pi * r * h, pi * r * r, pi * r * r});
        const double t = 2 * pi * u(rng);
        if (region == 0) {
          s = {{r * std::cos(t), r * std::sin(t), (u(rng) - 0.5) * h}, {std::cos(t), std::sin(t), 0.0}, 0};
        } else {
          const double rho = r * std::sqrt(u(rng));
          const double z = region == 1 ? h / 2 : -h / 2;
          s = {{rho * std::cos(t), rho * std::sin(t), z}, {0.0, 0.0, region == 1 ? 1.0 : -1.0}, region};
        }
        break;
      }
      case ShapeKind::cone: {
        detail::require_sizes(spec, {2});
        const double r = spec.size[0], h = spec.size[1];
        const double slant = std::hypot(r, h);
        const int region = pick({pi * r * slant, pi * r * r});
        const double t = 2 * pi * u(rng);
        if (region == 0) {
          const double frac = std::sqrt(u(rng));  // distance from the apex, as a fraction of the slant
          Eigen::RowVector3d nrm(h * std::cos(t), h * std::sin(t), r);
          s = {{r * frac * std::cos(t), r * frac * std::sin(t), h / 2 - h * frac}, nrm / slant, 0};
        } else {
          const double rho = r * std::sqrt(u(rng));
          s = {{rho * std::cos(t), rho * std::sin(t), -h / 2}, {0.0, 0.0, -1.0}, 1};
        }
        break;
      }
      case ShapeKind::torus: {
        detail::require_sizes(spec, {2});
        const double big = spec.size[0], small = spec.size[1];
        if (small >= big) throw ValidationError("shape: torus minor radius must be below the major radius");
        double phi;
        do {
          phi = 2 * pi * u(rng);
        } while (u(rng) * (big + small) > big + small * std::cos(phi));
        const double t = 2 * pi * u(rng);
        const double ring = big + small * std::cos(phi);
        Eigen::RowVector3d nrm(std::cos(phi) * std::cos(t), std::cos(phi) * std::sin(t), std::sin(phi));
        s = {{ring * std::cos(t), ring * std::sin(t), small * std::sin(phi)}, nrm, std::cos(phi) >= 0 ? 0 : 1};
        break;
      }
      case ShapeKind::plane: {
        detail::require_sizes(spec, {2});
        s = {{(u(rng) - 0.5) * spec.size[0], (u(rng) - 0.5) * spec.size[1], 0.0}, {0.0, 0.0, 1.0}, 0};
        break;
      }
      case ShapeKind::pyramid: {
        detail::require_sizes(spec, {2});
        const double a = spec.size[0] / 2, h = spec.size[1];
        const double side_area = a * std::hypot(a, h) * 2;  // one triangular face
        const int region = pick({side_area, side_area, side_area, side_area, 4 * a * a});
        const Eigen::RowVector3d apex(0, 0, h / 2);
        const std::array<Eigen::RowVector3d, 4> corner = {
            Eigen::RowVector3d(a, a, -h / 2), Eigen::RowVector3d(-a, a, -h / 2), Eigen::RowVector3d(-a, -a, -h / 2),
            Eigen::RowVector3d(a, -a, -h / 2)};
        if (region < 4) {
          const auto& c0 = corner[static_cast<std::size_t>(region)];
          const auto& c1 = corner[static_cast<std::size_t>((region + 1) % 4)];
          Eigen::RowVector3d hint = (c0 + c1) / 2;
          hint(2) = 0;
          s = detail::triangle_sample(apex, c0, c1, hint, 0, rng);
        } else {
          s = {{(2 * u(rng) - 1) * a, (2 * u(rng) - 1) * a, -h / 2}, {0.0, 0.0, -1.0}, 1};
        }
        break;
      }
      case ShapeKind::helix: {
        detail::require_sizes(spec, {4});
        const double coil = spec.size[0], pitch = spec.size[1], turns = spec.size[2], tube = spec.size[3];
        const double c = pitch / (2 * pi);
        const double kappa = coil / (coil * coil + c * c);
        if (tube * kappa >= 1.0 || tube >= coil) throw ValidationError("shape: helix tube radius too large for the coil");
        const double t_max = 2 * pi * turns;
        const double t = u(rng) * t_max;
        double v;
        do {
          v = 2 * pi * u(rng);
        } while (u(rng) * (1 + kappa * tube) > 1 - kappa * tube * std::cos(v));
        const double speed = std::hypot(coil, c);
        const Eigen::RowVector3d center(coil * std::cos(t), coil * std::sin(t), c * (t - t_max / 2));
        const Eigen::RowVector3d tangent(-coil * std::sin(t) / speed, coil * std::cos(t) / speed, c / speed);
        const Eigen::RowVector3d normal(-std::cos(t), -std::sin(t), 0.0);
        const Eigen::RowVector3d binormal = tangent.cross(normal);
        const Eigen::RowVector3d dir = std::cos(v) * normal + std::sin(v) * binormal;
        s = {center + tube * dir, dir, t < t_max / 2 ? 0 : 1};
        break;
      }
    }
    cloud.coords.row(i) = s.p;
    cloud.normals->row(i) = s.n;
    (*cloud.labels)[static_cast<std::size_t>(i)] = s.label;
  }

  if (spec.noise > 0.0) {
    const double diag = (cloud.coords.colwise().maxCoeff() - cloud.coords.colwise().minCoeff()).norm();
    std::normal_distribution<double> jitter(0.0, spec.noise * diag);
    for (Eigen::Index i = 0; i < n; ++i) cloud.coords.row(i) += jitter(rng) * cloud.normals->row(i);
  }

  const Eigen::Matrix3d rt = spec.rotation.transpose();
  cloud.coords = (cloud.coords * rt).rowwise() + spec.translation;
  cloud.normals = Matrix(*cloud.normals * rt);
  return cloud;
}

/// Rotation by `angle` radians about the z axis.
inline Eigen::Matrix3d yaw_rotation(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

/// Size parameters drawn from the ranges used by the synthetic datasets.
inline std::vector<double> random_size(ShapeKind kind, Rng& rng) {
  auto in = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  switch (kind) {
    case ShapeKind::sphere: return {in(0.5, 1.0)};
    case ShapeKind::cube: {
      const double side = in(0.6, 1.2);
      return {side * in(0.85, 1.15), side * in(0.85, 1.15), side * in(0.85, 1.15)};
    }
    case ShapeKind::cylinder: return {in(0.3, 0.6), in(0.8, 1.6)};
    case ShapeKind::cone: return {in(0.4, 0.8), in(0.8, 1.6)};
    case ShapeKind::torus: return {in(0.6, 0.9), in(0.15, 0.3)};
    case ShapeKind::plane: return {in(0.8, 1.6), in(0.8, 1.6)};
    case ShapeKind::pyramid: return {in(0.8, 1.4), in(0.6, 1.2)};
    case ShapeKind::helix: return {in(0.4, 0.7), in(0.3, 0.6), in(2.0, 4.0), in(0.05, 0.1)};
  }
  return {};
}

}  // namespace pct
