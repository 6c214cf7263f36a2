#include "fisheyedist/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Geometry>

#include "fisheyedist/parallel.hpp"

namespace fisheyedist {

namespace {

constexpr double kRayEpsilon = 1e-9;

double hash_lattice(std::uint32_t seed, int xi, int yi, int zi) {
  std::uint32_t h = seed + 0x9E3779B9u;
  h ^= static_cast<std::uint32_t>(xi) * 0x85EBCA6Bu;
  h = (h ^ (h >> 16)) * 0x45D9F3Bu;
  h ^= static_cast<std::uint32_t>(yi) * 0xC2B2AE35u;
  h = (h ^ (h >> 13)) * 0x27D4EB2Fu;
  h ^= static_cast<std::uint32_t>(zi) * 0x165667B1u;
  h ^= h >> 16;
  return static_cast<double>(h & 0xFFFFFFu) / static_cast<double>(0xFFFFFFu);
}

double smooth01(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise3(std::uint32_t seed, const Point3& p) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const int xi = static_cast<int>(fx), yi = static_cast<int>(fy), zi = static_cast<int>(fz);
  const double tx = smooth01(p.x() - fx), ty = smooth01(p.y() - fy), tz = smooth01(p.z() - fz);
  double corners[2][2][2];
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx)
        corners[dz][dy][dx] = hash_lattice(seed, xi + dx, yi + dy, zi + dz);
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double xy0 = lerp(lerp(corners[0][0][0], corners[0][0][1], tx),
                          lerp(corners[0][1][0], corners[0][1][1], tx), ty);
  const double xy1 = lerp(lerp(corners[1][0][0], corners[1][0][1], tx),
                          lerp(corners[1][1][0], corners[1][1][1], tx), ty);
  return lerp(xy0, xy1, tz);
}

struct PlaneBasis {
  Eigen::Vector3d e1, e2;
};

PlaneBasis plane_basis(const Eigen::Vector3d& n) {
  const Eigen::Vector3d up =
      std::abs(n.dot(Eigen::Vector3d::UnitY())) < 0.9 ? Eigen::Vector3d::UnitY()
                                                      : Eigen::Vector3d::UnitX();
  const Eigen::Vector3d e1 = n.cross(up).normalized();
  return {e1, n.cross(e1).normalized()};
}

}  // namespace

double Texture::value(const Point3& p) const {
  double raw = 0.5;
  switch (kind) {
    case Kind::constant:
      return std::clamp(base, 0.0, 1.0);
    case Kind::checker: {
      const long long cell = static_cast<long long>(std::floor(p.x() * frequency)) +
                             static_cast<long long>(std::floor(p.y() * frequency)) +
                             static_cast<long long>(std::floor(p.z() * frequency));
      raw = (cell & 1) ? 1.0 : 0.0;
      break;
    }
    case Kind::value_noise: {
      double sum = 0.0, amplitude = 1.0, total = 0.0;
      double freq = frequency;
      for (int o = 0; o < std::max(1, octaves); ++o) {
        sum += amplitude * value_noise3(seed + static_cast<std::uint32_t>(o) * 101u, p * freq);
        total += amplitude;
        amplitude *= 0.5;
        freq *= 2.0;
      }
      raw = sum / total;
      break;
    }
  }
  return std::clamp(base + contrast * (raw - 0.5), 0.0, 1.0);
}

RayHit trace_ray(const Scene& scene, const Point3& origin, const Eigen::Vector3d& d) {
  double best = std::numeric_limits<double>::infinity();
  const Texture* best_tex = nullptr;

  for (const Plane& pl : scene.planes) {
    const double denom = d.dot(pl.normal);
    if (std::abs(denom) < 1e-12) continue;
    const double s = (pl.point - origin).dot(pl.normal) / denom;
    if (s <= kRayEpsilon || s >= best) continue;
    if (pl.half_u > 0.0 || pl.half_v > 0.0) {
      const PlaneBasis basis = plane_basis(pl.normal);
      const Eigen::Vector3d r = origin + s * d - pl.point;
      if (pl.half_u > 0.0 && std::abs(r.dot(basis.e1)) > pl.half_u) continue;
      if (pl.half_v > 0.0 && std::abs(r.dot(basis.e2)) > pl.half_v) continue;
    }
    best = s;
    best_tex = &pl.texture;
  }

  for (const Sphere& sp : scene.spheres) {
    const Eigen::Vector3d oc = origin - sp.center;
    const double b = oc.dot(d);
    const double disc = b * b - (oc.squaredNorm() - sp.radius * sp.radius);
    if (disc < 0.0) continue;
    const double sq = std::sqrt(disc);
    double s = -b - sq;
    if (s <= kRayEpsilon) s = -b + sq;
    if (s <= kRayEpsilon || s >= best) continue;
    best = s;
    best_tex = &sp.texture;
  }

  for (const Box& bx : scene.boxes) {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
      if (std::abs(d[axis]) < 1e-15) {
        if (origin[axis] < bx.min[axis] || origin[axis] > bx.max[axis]) {
          t0 = std::numeric_limits<double>::infinity();
          break;
        }
        continue;
      }
      double a = (bx.min[axis] - origin[axis]) / d[axis];
      double b = (bx.max[axis] - origin[axis]) / d[axis];
      if (a > b) std::swap(a, b);
      t0 = std::max(t0, a);
      t1 = std::min(t1, b);
    }
    if (t0 > t1) continue;
    const double s = t0 > kRayEpsilon ? t0 : t1;
    if (s <= kRayEpsilon || s >= best) continue;
    best = s;
    best_tex = &bx.texture;
  }

  if (best_tex == nullptr) return {};
  return {best, best_tex->value(origin + best * d), true};
}

RenderResult render(const Scene& scene, const FisheyeIntrinsics& K, const Pose& cam_to_world,
                    const ThetaLUT& lut) {
  const PointCloud rays = unproject_rays(K, lut);
  RenderResult out{Image(K.width, K.height, 1, scene.background_intensity),
                   DistanceMap(K.width, K.height, scene.background_distance)};
  const Eigen::Matrix3d& R = cam_to_world.rotation();
  const Point3 origin = cam_to_world.translation();
  parallel_rows(K.height, [&](int y) {
    for (int x = 0; x < K.width; ++x) {
      const int i = rays.index(x, y);
      if (!rays.valid[i]) continue;
      const RayHit hit = trace_ray(scene, origin, R * rays.points[i]);
      if (!hit.hit) continue;
      out.image.at(x, y) = hit.intensity;
      out.distance.at(x, y) = hit.distance;
    }
  });
  return out;
}

RenderResult render(const Scene& scene, const FisheyeIntrinsics& K, const Pose& cam_to_world) {
  return render(scene, K, cam_to_world, build_theta_lut(K));
}

Pose SequenceSnippet::relative_pose(int from, int to) const {
  if (from < 0 || from >= count() || to < 0 || to >= count())
    throw std::out_of_range("SequenceSnippet::relative_pose: frame index out of range");
  if (!frames[from].cam_to_ref || !frames[to].cam_to_ref)
    throw std::runtime_error("SequenceSnippet::relative_pose: frame lacks a ground-truth pose");
  return compose(invert(*frames[to].cam_to_ref), *frames[from].cam_to_ref);
}

double SequenceSnippet::adjacent_displacement(int i) const {
  if (i < 0 || i + 1 >= count())
    throw std::out_of_range("SequenceSnippet::adjacent_displacement: index out of range");
  return displacement_from_odometry(frames[i].odometry, frames[i + 1].odometry);
}

SequenceSnippet make_snippet(const Scene& scene, const FisheyeIntrinsics& K,
                             const std::vector<TrajectoryPoint>& trajectory) {
  if (trajectory.size() < 2)
    throw std::invalid_argument("make_snippet: need at least 2 trajectory frames");
  const ThetaLUT lut = build_theta_lut(K);
  SequenceSnippet snippet(K);
  double timestamp = 0.0;
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    if (i > 0) {
      const Pose rel = compose(invert(trajectory[i].cam_to_ref), trajectory[i - 1].cam_to_ref);
      const double baseline = rel.translation().norm();
      const double vsum = trajectory[i - 1].speed + trajectory[i].speed;
      if (baseline > 0.0 && vsum <= 0.0)
        throw std::invalid_argument("make_snippet: moving frames need nonzero speeds");
      timestamp += vsum > 0.0 ? 2.0 * baseline / vsum : 0.1;
    }
    RenderResult rendered = render(scene, K, trajectory[i].cam_to_ref, lut);
    snippet.frames.push_back(SnippetFrame{std::move(rendered.image), std::move(rendered.distance),
                                          trajectory[i].cam_to_ref,
                                          OdometrySample{trajectory[i].speed, timestamp}});
  }
  return snippet;
}

void validate_odometry_consistency(const SequenceSnippet& snippet) {
  for (int i = 0; i + 1 < snippet.count(); ++i) {
    const double baseline = snippet.relative_pose(i, i + 1).translation().norm();
    const double dx = snippet.adjacent_displacement(i);
    if (std::abs(baseline - dx) > 1e-9)
      throw std::runtime_error("SequenceSnippet: poses inconsistent with odometry");
  }
}

FisheyeIntrinsics reference_intrinsics(int width, int height) {
  const double k_base[4] = {320.0, -15.0, 0.8, -0.02};
  const double theta_max = 1.745;
  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double corner = std::hypot(width - 0.5 - cx, height - 0.5 - cy);
  double rho_base = 0.0;
  for (int i = 4; i >= 1; --i) rho_base = (rho_base + k_base[i - 1]) * theta_max;
  // Image circle 2% beyond the corner radius so every pixel is calibrated.
  const double s = 1.02 * corner / rho_base;
  return FisheyeIntrinsics(s * k_base[0], s * k_base[1], s * k_base[2], s * k_base[3], 1.0, 1.0,
                           cx, cy, width, height, theta_max);
}

}  // namespace fisheyedist
