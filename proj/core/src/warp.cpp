#include "fisheyedist/warp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fisheyedist/parallel.hpp"

namespace fisheyedist {

namespace {

struct ProjectionWithJacobian {
  double u, v;
  double du_dd, dv_dd;
  bool in_fov;
};

// Projects Xs (a source-frame point) and differentiates the image coordinates
// along dX/dD = w, where Xs = D*w + t. Near the optical axis the polar
// parameterization degenerates, so a first-order (pinhole-like) limit is used.
ProjectionWithJacobian project_with_jacobian(const Point3& Xs, const Point3& w,
                                             const FisheyeIntrinsics& K) {
  const double x = Xs.x(), y = Xs.y(), z = Xs.z();
  const double rc = std::hypot(x, y);

  if (rc <= 1e-8 * std::max(std::abs(z), 1.0)) {
    if (z <= 0.0) return {K.cx, K.cy, 0.0, 0.0, false};
    const double theta = std::numbers::pi / 2.0 - std::atan2(z, rc);
    const double u = K.cx + K.ax * K.k1 * x / z;
    const double v = K.cy + K.ay * K.k1 * y / z;
    const double du = K.ax * K.k1 * (w.x() * z - x * w.z()) / (z * z);
    const double dv = K.ay * K.k1 * (w.y() * z - y * w.z()) / (z * z);
    return {u, v, du, dv, theta <= K.theta_max};
  }

  const double theta = std::numbers::pi / 2.0 - std::atan2(z, rc);
  const double rho = K.rho(theta);
  const double drho = K.rho_prime(theta);
  const double cos_phi = x / rc;
  const double sin_phi = y / rc;
  const double u = K.ax * rho * cos_phi + K.cx;
  const double v = K.ay * rho * sin_phi + K.cy;

  const double norm2 = rc * rc + z * z;
  const double dtheta_dd = (z * (x * w.x() + y * w.y()) / rc - rc * w.z()) / norm2;
  const double dphi_dd = (x * w.y() - y * w.x()) / (rc * rc);
  const double du_dd = K.ax * (drho * dtheta_dd * cos_phi - rho * sin_phi * dphi_dd);
  const double dv_dd = K.ay * (drho * dtheta_dd * sin_phi + rho * cos_phi * dphi_dd);
  return {u, v, du_dd, dv_dd, theta <= K.theta_max};
}

// Sub-micron pixel tolerance keeps border pixels valid under FP jitter of
// an identity warp; taps are clamped, so a read at -1e-9 hits column 0.
constexpr double kBoundsEps = 1e-6;

bool sampling_bounds(double u, double v, const FisheyeIntrinsics& K) {
  return u >= -kBoundsEps && u <= K.width - 1.0 + kBoundsEps && v >= -kBoundsEps &&
         v <= K.height - 1.0 + kBoundsEps;
}

}  // namespace

PointCloud unproject_map(const DistanceMap& D, const FisheyeIntrinsics& K, const ThetaLUT& lut) {
  if (D.width() != K.width || D.height() != K.height)
    throw std::invalid_argument("unproject_map: distance map does not match intrinsics size");
  D.validate();
  PointCloud cloud = unproject_rays(K, lut);
  for (int i = 0; i < cloud.width * cloud.height; ++i)
    if (cloud.valid[i]) cloud.points[i] *= D[i];
  return cloud;
}

FlowField reproject(const PointCloud& cloud, const Pose& T, const FisheyeIntrinsics& K) {
  FlowField flow{Grid(cloud.width, cloud.height), Grid(cloud.width, cloud.height),
                 Mask(cloud.width, cloud.height)};
  parallel_rows(cloud.height, [&](int y) {
    for (int x = 0; x < cloud.width; ++x) {
      const int i = cloud.index(x, y);
      if (!cloud.valid[i]) continue;
      const Point3 Xs = T.apply(cloud.points[i]);
      if (Xs.squaredNorm() == 0.0) continue;
      const auto p = project_with_jacobian(Xs, Point3::Zero(), K);
      flow.u.at(x, y) = p.u;
      flow.v.at(x, y) = p.v;
      flow.valid.at(x, y) = p.in_fov && sampling_bounds(p.u, p.v, K) ? 1 : 0;
    }
  });
  return flow;
}

BilinearTaps bilinear_taps(double u, double v, int width, int height) {
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  x0 = std::min(std::max(x0, 0), width - 2);
  y0 = std::min(std::max(y0, 0), height - 2);
  const double fx = u - x0;
  const double fy = v - y0;
  return {x0, y0, (1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy, fx, fy};
}

double bilinear_grid(const Grid& g, const BilinearTaps& t) {
  return t.w00 * g.at(t.x0, t.y0) + t.w10 * g.at(t.x0 + 1, t.y0) +
         t.w01 * g.at(t.x0, t.y0 + 1) + t.w11 * g.at(t.x0 + 1, t.y0 + 1);
}

Image bilinear_sample(const Image& src, const FlowField& flow) {
  Image out(flow.width(), flow.height(), src.channels());
  parallel_rows(flow.height(), [&](int y) {
    for (int x = 0; x < flow.width(); ++x) {
      if (!flow.valid.at(x, y)) continue;
      const BilinearTaps t = bilinear_taps(flow.u.at(x, y), flow.v.at(x, y), src.width(),
                                           src.height());
      for (int c = 0; c < src.channels(); ++c) {
        out.at(x, y, c) = t.w00 * src.at(t.x0, t.y0, c) + t.w10 * src.at(t.x0 + 1, t.y0, c) +
                          t.w01 * src.at(t.x0, t.y0 + 1, c) +
                          t.w11 * src.at(t.x0 + 1, t.y0 + 1, c);
      }
    }
  });
  return out;
}

SynthesisResult synthesize_view(const DistanceMap& D_target, const Image& I_source,
                                const Pose& target_to_source, const FisheyeIntrinsics& K,
                                const ThetaLUT& lut) {
  if (I_source.width() != K.width || I_source.height() != K.height)
    throw std::invalid_argument("synthesize_view: source image does not match intrinsics size");
  const PointCloud cloud = unproject_map(D_target, K, lut);
  const FlowField flow = reproject(cloud, target_to_source, K);
  Image image = bilinear_sample(I_source, flow);
  return {std::move(image), flow.valid};
}

Eigen::Vector2d warp_jacobian(const Pixel& p, double distance, const Pose& target_to_source,
                              const FisheyeIntrinsics& K, const ThetaLUT& lut) {
  const Point3 ray = unproject_fisheye(p, 1.0, K, lut);
  const Point3 w = target_to_source.rotation() * ray;
  const Point3 Xs = distance * w + target_to_source.translation();
  if (Xs.squaredNorm() == 0.0) throw std::runtime_error("warp_jacobian: warp invalid at sample");
  const auto proj = project_with_jacobian(Xs, w, K);
  if (!proj.in_fov || !sampling_bounds(proj.u, proj.v, K))
    throw std::runtime_error("warp_jacobian: warp invalid at sample");
  return {proj.du_dd, proj.dv_dd};
}

std::vector<WarpedPoint> warp_points(const PointCloud& rays, const Grid& D,
                                     const Pose& target_to_source,
                                     const FisheyeIntrinsics& K_source) {
  if (rays.width != D.width() || rays.height != D.height())
    throw std::invalid_argument("warp_points: rays and distances disagree on size");
  std::vector<WarpedPoint> out(static_cast<std::size_t>(rays.width) * rays.height);
  const Eigen::Matrix3d& R = target_to_source.rotation();
  const Eigen::Vector3d& t = target_to_source.translation();
  parallel_rows(rays.height, [&](int y) {
    for (int x = 0; x < rays.width; ++x) {
      const int i = rays.index(x, y);
      if (!rays.valid[i]) continue;
      const Point3 w = R * rays.points[i];
      const Point3 Xs = D[i] * w + t;
      const double dist = Xs.norm();
      if (dist == 0.0) continue;
      const auto proj = project_with_jacobian(Xs, w, K_source);
      WarpedPoint& wp = out[i];
      wp.u = proj.u;
      wp.v = proj.v;
      wp.du_dd = proj.du_dd;
      wp.dv_dd = proj.dv_dd;
      wp.dist = dist;
      wp.ddist_dd = Xs.dot(w) / dist;
      wp.valid = proj.in_fov && sampling_bounds(proj.u, proj.v, K_source);
    }
  });
  return out;
}

}  // namespace fisheyedist
