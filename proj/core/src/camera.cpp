#include "fisheyedist/camera.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

namespace fisheyedist {

namespace {

constexpr int kMonotonicitySamples = 2048;

// Projection without the image-bounds check, plus bilinear-safe bounds used
// by warp grids: all four sampling neighbors must exist.
struct RawProjection {
  double u, v;
  bool in_fov;
};

RawProjection project_raw(const Point3& X, const FisheyeIntrinsics& K) {
  const double rc = std::hypot(X.x(), X.y());
  const double theta = std::numbers::pi / 2.0 - std::atan2(X.z(), rc);
  const double phi = std::atan2(X.y(), X.x());
  const double rho = K.rho(theta);
  return {rho * std::cos(phi) * K.ax + K.cx, rho * std::sin(phi) * K.ay + K.cy,
          theta <= K.theta_max};
}

bool inside_sampling_bounds(double u, double v, int width, int height) {
  constexpr double eps = 1e-6;  // FP slack; bilinear taps clamp at the border
  return u >= -eps && u <= width - 1.0 + eps && v >= -eps && v <= height - 1.0 + eps;
}

}  // namespace

FisheyeIntrinsics::FisheyeIntrinsics(double k1, double k2, double k3, double k4, double ax,
                                     double ay, double cx, double cy, int width, int height,
                                     double theta_max)
    : k1(k1), k2(k2), k3(k3), k4(k4), ax(ax), ay(ay), cx(cx), cy(cy), width(width),
      height(height), theta_max(theta_max) {
  if (!(k1 > 0.0)) throw std::invalid_argument("FisheyeIntrinsics: k1 must be positive");
  if (!(theta_max > 0.0 && theta_max <= std::numbers::pi))
    throw std::invalid_argument("FisheyeIntrinsics: theta_max must be in (0, pi]");
  if (!(ax > 0.0 && ay > 0.0))
    throw std::invalid_argument("FisheyeIntrinsics: aspect scales must be positive");
  if (width < 1 || height < 1)
    throw std::invalid_argument("FisheyeIntrinsics: image size must be positive");
  for (int i = 0; i <= kMonotonicitySamples; ++i) {
    const double theta = theta_max * i / kMonotonicitySamples;
    if (!(rho_prime(theta) > 0.0))
      throw std::invalid_argument("FisheyeIntrinsics: rho(theta) must be strictly increasing");
  }
}

FisheyeIntrinsics FisheyeIntrinsics::half_resolution() const {
  return FisheyeIntrinsics(k1 / 2.0, k2 / 2.0, k3 / 2.0, k4 / 2.0, ax, ay,
                           (cx - 0.5) / 2.0, (cy - 0.5) / 2.0, width / 2, height / 2, theta_max);
}

PinholeIntrinsics::PinholeIntrinsics(double fx, double fy, double cx, double cy, int width,
                                     int height)
    : fx(fx), fy(fy), cx(cx), cy(cy), width(width), height(height) {
  if (!(fx > 0.0 && fy > 0.0))
    throw std::invalid_argument("PinholeIntrinsics: focal lengths must be positive");
}

ThetaLUT::ThetaLUT(double radius_step, std::vector<double> thetas)
    : step_(radius_step), thetas_(std::move(thetas)) {
  if (thetas_.size() < 2) throw std::invalid_argument("ThetaLUT: need at least 2 entries");
  if (!(step_ > 0.0)) throw std::invalid_argument("ThetaLUT: radius step must be positive");
  for (std::size_t i = 1; i < thetas_.size(); ++i)
    if (!(thetas_[i] > thetas_[i - 1]))
      throw std::invalid_argument("ThetaLUT: entries must be strictly increasing");
  max_radius_ = step_ * static_cast<double>(thetas_.size() - 1);
}

double ThetaLUT::operator()(double rho_pixels) const {
  if (!(rho_pixels >= 0.0) || rho_pixels > max_radius_ * (1.0 + 1e-12) + 1e-12)
    throw std::out_of_range("ThetaLUT: radius outside table range");
  const double pos = std::min(rho_pixels, max_radius_) / step_;
  const auto i = std::min(static_cast<std::size_t>(pos), thetas_.size() - 2);
  const double frac = pos - static_cast<double>(i);
  return thetas_[i] + frac * (thetas_[i + 1] - thetas_[i]);
}

PixelProjection project_fisheye(const Point3& X, const FisheyeIntrinsics& K) {
  if (!X.allFinite()) throw std::invalid_argument("project_fisheye: non-finite point");
  if (X.squaredNorm() == 0.0) throw std::invalid_argument("project_fisheye: zero-norm point");
  const RawProjection r = project_raw(X, K);
  const bool valid =
      r.in_fov && r.u >= 0.0 && r.u < K.width && r.v >= 0.0 && r.v < K.height;
  return {{r.u, r.v}, valid};
}

double solve_theta(double rho, const FisheyeIntrinsics& K) {
  const double rho_top = K.rho_max();
  if (!(rho >= -1e-12) || rho > rho_top * (1.0 + 1e-12) + 1e-12)
    throw std::out_of_range("solve_theta: radius outside [0, rho(theta_max)]");
  rho = std::clamp(rho, 0.0, rho_top);
  if (rho == 0.0) return 0.0;

  double lo = 0.0, hi = K.theta_max;
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (K.rho(mid) < rho)
      lo = mid;
    else
      hi = mid;
  }
  double theta = 0.5 * (lo + hi);
  for (int it = 0; it < 5; ++it) {
    const double step = (K.rho(theta) - rho) / K.rho_prime(theta);
    theta = std::clamp(theta - step, 0.0, K.theta_max);
    if (std::abs(step) < 1e-13) break;
  }
  return theta;
}

ThetaLUT build_theta_lut(const FisheyeIntrinsics& K, int n_entries) {
  if (n_entries < 2) throw std::invalid_argument("build_theta_lut: need at least 2 entries");
  // Cover the image diagonal in aspect-normalized pixels, capped at the
  // calibrated radius.
  double corner_radius = 0.0;
  for (const double u : {-0.5, K.width - 0.5})
    for (const double v : {-0.5, K.height - 0.5})
      corner_radius = std::max(corner_radius, std::hypot((u - K.cx) / K.ax, (v - K.cy) / K.ay));
  const double r_max = std::min(corner_radius, K.rho_max());
  const double step = r_max / (n_entries - 1);
  std::vector<double> thetas(n_entries);
  for (int i = 0; i < n_entries; ++i) thetas[i] = solve_theta(step * i, K);
  return ThetaLUT(step, std::move(thetas));
}

Point3 unproject_fisheye(const Pixel& p, double distance, const FisheyeIntrinsics& K,
                         const ThetaLUT& lut) {
  if (!(distance > 0.0) || !std::isfinite(distance))
    throw std::invalid_argument("unproject_fisheye: distance must be positive");
  const double xi = (p.x() - K.cx) / K.ax;
  const double yi = (p.y() - K.cy) / K.ay;
  const double radius = std::hypot(xi, yi);
  if (!lut.covers(radius))
    throw std::out_of_range("unproject_fisheye: pixel radius beyond calibration");
  const double theta = lut(radius);
  const double phi = std::atan2(yi, xi);
  // Unit ray scaled by the distance, matching unproject_rays bit for bit.
  const Point3 ray{std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                   std::cos(theta)};
  return distance * ray;
}

PointCloud unproject_rays(const FisheyeIntrinsics& K, const ThetaLUT& lut) {
  PointCloud cloud;
  cloud.width = K.width;
  cloud.height = K.height;
  cloud.points.assign(static_cast<std::size_t>(K.width) * K.height, Point3::Zero());
  cloud.valid.assign(cloud.points.size(), 0);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const double xi = (x - K.cx) / K.ax;
      const double yi = (y - K.cy) / K.ay;
      const double radius = std::hypot(xi, yi);
      if (!lut.covers(radius)) continue;
      const double theta = lut(radius);
      const double phi = std::atan2(yi, xi);
      const int i = cloud.index(x, y);
      cloud.points[i] = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                         std::cos(theta)};
      cloud.valid[i] = 1;
    }
  }
  return cloud;
}

PixelProjection project_pinhole(const Point3& X, const PinholeIntrinsics& K) {
  if (!X.allFinite()) throw std::invalid_argument("project_pinhole: non-finite point");
  if (X.z() <= 0.0) return {{0.0, 0.0}, false};
  const double u = K.fx * X.x() / X.z() + K.cx;
  const double v = K.fy * X.y() / X.z() + K.cy;
  return {{u, v}, u >= 0.0 && u < K.width && v >= 0.0 && v < K.height};
}

Point3 unproject_pinhole(const Pixel& p, double depth, const PinholeIntrinsics& K) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw std::invalid_argument("unproject_pinhole: depth must be positive");
  return {(p.x() - K.cx) / K.fx * depth, (p.y() - K.cy) / K.fy * depth, depth};
}

double sigma_to_distance(double sigma, double a, double b, CameraModelKind model) {
  const double affine = a * sigma + b;
  return model == CameraModelKind::fisheye ? affine : 1.0 / affine;
}

SigmaAffine sigma_affine_defaults(CameraModelKind model) {
  // Both map sigma in [0,1] onto [0.1, 100] meters.
  if (model == CameraModelKind::fisheye) return {99.9, 0.1};
  return {9.99, 0.01};
}

namespace {

FlowField map_target_rays(const FisheyeIntrinsics& K, int target_width, int target_height,
                          const std::function<Point3(double, double)>& ray_of_pixel) {
  FlowField grid{Grid(target_width, target_height), Grid(target_width, target_height),
                 Mask(target_width, target_height)};
  for (int y = 0; y < target_height; ++y) {
    for (int x = 0; x < target_width; ++x) {
      const RawProjection r = project_raw(ray_of_pixel(x, y), K);
      grid.u.at(x, y) = r.u;
      grid.v.at(x, y) = r.v;
      grid.valid.at(x, y) =
          r.in_fov && inside_sampling_bounds(r.u, r.v, K.width, K.height) ? 1 : 0;
    }
  }
  return grid;
}

}  // namespace

FlowField rectification_map(const FisheyeIntrinsics& K, const PinholeIntrinsics& target) {
  // Target rays all satisfy theta < pi/2; content beyond that is lost, which
  // is inherent to the rectilinear viewport.
  return map_target_rays(K, target.width, target.height, [&](double x, double y) -> Point3 {
    return {(x - target.cx) / target.fx, (y - target.cy) / target.fy, 1.0};
  });
}

FlowField rectification_map(const FisheyeIntrinsics& K, const CylindricalSpec& target) {
  return map_target_rays(K, target.width, target.height, [&](double x, double y) -> Point3 {
    const double psi = (x - target.cx) / target.f_psi;
    return {std::sin(psi), (y - target.cy) / target.f_y, std::cos(psi)};
  });
}

}  // namespace fisheyedist
