#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "fisheyedist/camera.hpp"

namespace fisheyedist {

/// Rigid transform parameterized by intrinsic X-Y-Z Euler angles plus a
/// translation in meters. Acts on points as X' = R*X + t.
class Pose {
 public:
  Pose();  // identity
  Pose(double roll, double pitch, double yaw, const Eigen::Vector3d& translation);

  static Pose identity() { return Pose(); }
  static Pose from_matrix(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  double roll() const { return roll_; }
  double pitch() const { return pitch_; }
  double yaw() const { return yaw_; }
  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3 apply(const Point3& X) const { return rotation_ * X + translation_; }

 private:
  double roll_, pitch_, yaw_;
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// compose(P1, P2) applies P2 first: X' = P1(P2(X)).
Pose compose(const Pose& first_applied_last, const Pose& first_applied_first);
Pose invert(const Pose& P);

std::vector<Point3> transform_points(const Pose& P, const std::vector<Point3>& cloud);

struct OdometrySample {
  double v = 0.0;          // vehicle speed, m/s
  double timestamp = 0.0;  // seconds
};

/// Trapezoidal displacement magnitude between two odometry samples.
/// Throws when timestamps coincide.
double displacement_from_odometry(const OdometrySample& a, const OdometrySample& b);

/// Replaces the translation by its unit direction times delta_x, leaving the
/// rotation untouched. Throws on a near-zero baseline (|t| <= epsilon) or a
/// non-positive delta_x.
Pose scale_pose(const Pose& P, double delta_x, double translation_epsilon = 1e-6);

/// CLI text form: six numbers "roll pitch yaw tx ty tz".
Pose parse_pose(const std::string& text);
std::string format_pose(const Pose& P);

}  // namespace fisheyedist
