#include "fisheyedist/se3.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

namespace fisheyedist {

namespace {

Eigen::Matrix3d euler_xyz_matrix(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

// Inverse of euler_xyz_matrix: R = Rx(roll) * Ry(pitch) * Rz(yaw), so
// R(0,2) = sin(pitch), R(1,2) = -sin(roll)cos(pitch), R(0,1) = -cos(pitch)sin(yaw).
void euler_xyz_from_matrix(const Eigen::Matrix3d& R, double& roll, double& pitch, double& yaw) {
  pitch = std::asin(std::clamp(R(0, 2), -1.0, 1.0));
  if (std::abs(R(0, 2)) < 1.0 - 1e-12) {
    roll = std::atan2(-R(1, 2), R(2, 2));
    yaw = std::atan2(-R(0, 1), R(0, 0));
  } else {
    // Gimbal lock: only roll+-yaw is observable; put it all in roll.
    roll = std::atan2(R(2, 1), R(1, 1));
    yaw = 0.0;
  }
}

}  // namespace

Pose::Pose() : roll_(0), pitch_(0), yaw_(0), rotation_(Eigen::Matrix3d::Identity()),
               translation_(Eigen::Vector3d::Zero()) {}

Pose::Pose(double roll, double pitch, double yaw, const Eigen::Vector3d& translation)
    : roll_(roll), pitch_(pitch), yaw_(yaw), rotation_(euler_xyz_matrix(roll, pitch, yaw)),
      translation_(translation) {
  if (!translation_.allFinite() || !std::isfinite(roll) || !std::isfinite(pitch) ||
      !std::isfinite(yaw))
    throw std::invalid_argument("Pose: non-finite parameters");
}

Pose Pose::from_matrix(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) {
  const Eigen::Matrix3d delta = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
  if (delta.cwiseAbs().maxCoeff() > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9)
    throw std::invalid_argument("Pose: matrix is not a rotation");
  Pose P;
  euler_xyz_from_matrix(rotation, P.roll_, P.pitch_, P.yaw_);
  P.rotation_ = rotation;
  P.translation_ = translation;
  return P;
}

Pose compose(const Pose& outer, const Pose& inner) {
  return Pose::from_matrix(outer.rotation() * inner.rotation(),
                           outer.rotation() * inner.translation() + outer.translation());
}

Pose invert(const Pose& P) {
  const Eigen::Matrix3d Rt = P.rotation().transpose();
  return Pose::from_matrix(Rt, -(Rt * P.translation()));
}

std::vector<Point3> transform_points(const Pose& P, const std::vector<Point3>& cloud) {
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const Point3& X : cloud) out.push_back(P.apply(X));
  return out;
}

double displacement_from_odometry(const OdometrySample& a, const OdometrySample& b) {
  if (a.timestamp == b.timestamp)
    throw std::invalid_argument("displacement_from_odometry: timestamps must differ");
  return 0.5 * (a.v + b.v) * std::abs(b.timestamp - a.timestamp);
}

Pose scale_pose(const Pose& P, double delta_x, double translation_epsilon) {
  const double norm = P.translation().norm();
  if (norm <= translation_epsilon)
    throw std::invalid_argument("scale_pose: degenerate baseline");
  if (!(delta_x > 0.0)) throw std::invalid_argument("scale_pose: delta_x must be positive");
  Pose scaled(P.roll(), P.pitch(), P.yaw(), P.translation() / norm * delta_x);
  return scaled;
}

Pose parse_pose(const std::string& text) {
  std::istringstream in(text);
  double r, p, y, tx, ty, tz;
  if (!(in >> r >> p >> y >> tx >> ty >> tz))
    throw std::runtime_error("parse_pose: expected six numbers \"roll pitch yaw tx ty tz\"");
  std::string rest;
  if (in >> rest) throw std::runtime_error("parse_pose: trailing tokens after six numbers");
  return Pose(r, p, y, {tx, ty, tz});
}

std::string format_pose(const Pose& P) {
  std::ostringstream out;
  out.precision(17);
  out << P.roll() << " " << P.pitch() << " " << P.yaw() << " " << P.translation().x() << " "
      << P.translation().y() << " " << P.translation().z();
  return out.str();
}

}  // namespace fisheyedist
