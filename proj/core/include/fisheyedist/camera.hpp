#pragma once

#include <vector>

#include <Eigen/Core>

#include "fisheyedist/image.hpp"

namespace fisheyedist {

using Point3 = Eigen::Vector3d;  // camera-frame meters
using Pixel = Eigen::Vector2d;   // continuous pixel coordinates, integer = pixel center

struct PixelProjection {
  Pixel pixel{0.0, 0.0};
  bool valid = false;
};

/// Polynomial fisheye model. The radial mapping from incident angle theta to
/// image radius is rho(theta) = k1*t + k2*t^2 + k3*t^3 + k4*t^4 (pixels),
/// strictly increasing on [0, theta_max].
struct FisheyeIntrinsics {
  double k1, k2, k3, k4;    // pixels per radian^i
  double ax, ay;            // aspect scale, dimensionless
  double cx, cy;            // principal point, pixels
  int width, height;        // image size, pixels
  double theta_max;         // maximum calibrated incident angle, radians

  FisheyeIntrinsics(double k1, double k2, double k3, double k4, double ax, double ay,
                    double cx, double cy, int width, int height, double theta_max);

  double rho(double theta) const {
    return theta * (k1 + theta * (k2 + theta * (k3 + theta * k4)));
  }
  double rho_prime(double theta) const {
    return k1 + theta * (2.0 * k2 + theta * (3.0 * k3 + theta * 4.0 * k4));
  }
  double rho_max() const { return rho(theta_max); }

  /// Intrinsics of the same camera after 2x2-average downsampling.
  FisheyeIntrinsics half_resolution() const;
};

struct PinholeIntrinsics {
  double fx, fy;
  double cx, cy;
  int width, height;

  PinholeIntrinsics(double fx, double fy, double cx, double cy, int width, int height);
};

/// Cylindrical rectification viewport: u maps azimuth linearly
/// (f_psi pixels per radian), v maps cylinder height linearly (f_y pixels
/// per unit height at radius 1).
struct CylindricalSpec {
  double f_psi;
  double f_y;
  double cx, cy;
  int width, height;
};

/// Monotone table image radius (pixels) -> incident angle (radians) with a
/// fixed radius step, precomputed with solve_theta. Queries interpolate
/// linearly. Read-only after construction; shareable across threads.
class ThetaLUT {
 public:
  ThetaLUT(double radius_step, std::vector<double> thetas);

  /// Interpolated incident angle; throws std::out_of_range outside [0, max_radius].
  double operator()(double rho_pixels) const;

  bool covers(double rho_pixels) const {
    return rho_pixels >= 0.0 && rho_pixels <= max_radius_;
  }
  double max_radius() const { return max_radius_; }
  double radius_step() const { return step_; }
  const std::vector<double>& thetas() const { return thetas_; }

 private:
  double step_;
  double max_radius_;
  std::vector<double> thetas_;
};

/// Forward fisheye projection of a camera-frame point. The valid flag is set
/// when the incident angle is within calibration and the pixel lands inside
/// [0,width) x [0,height). Throws on zero-norm or non-finite input.
PixelProjection project_fisheye(const Point3& X, const FisheyeIntrinsics& K);

/// Unique theta in [0, theta_max] with rho(theta) = rho, to 1e-10 rad
/// (bracketed bisection refined by Newton). Oracle behind the LUT.
/// Throws std::out_of_range when rho is outside [0, rho(theta_max)].
double solve_theta(double rho, const FisheyeIntrinsics& K);

/// Radius->theta table with n_entries samples covering the image diagonal
/// (capped at the calibrated radius). n_entries >= 2.
ThetaLUT build_theta_lut(const FisheyeIntrinsics& K, int n_entries = 4096);

/// Inverse projection: pixel plus Euclidean distance D -> camera-frame point
/// with ||X|| = D. Throws when D <= 0 or the pixel radius is beyond the
/// calibrated radius covered by the LUT.
Point3 unproject_fisheye(const Pixel& p, double distance, const FisheyeIntrinsics& K,
                         const ThetaLUT& lut);

/// Unit ray directions for every pixel center. Pixels whose radius falls
/// outside the LUT coverage are flagged invalid.
PointCloud unproject_rays(const FisheyeIntrinsics& K, const ThetaLUT& lut);

PixelProjection project_pinhole(const Point3& X, const PinholeIntrinsics& K);

/// depth means z_c here; throws when depth <= 0.
Point3 unproject_pinhole(const Pixel& p, double depth, const PinholeIntrinsics& K);

enum class CameraModelKind { fisheye, pinhole };

/// Affine (fisheye, D = a*sigma + b) or inverse-affine (pinhole,
/// D = 1/(a*sigma + b)) output-to-distance conversion.
double sigma_to_distance(double sigma, double a, double b, CameraModelKind model);

/// Coefficients that map sigma in [0,1] onto distances in [0.1, 100].
struct SigmaAffine {
  double a, b;
};
SigmaAffine sigma_affine_defaults(CameraModelKind model);

/// Per-target-pixel source coordinates that undistort a fisheye image onto a
/// rectilinear viewport. Target rays outside the calibrated FOV are flagged
/// invalid, not fatal.
FlowField rectification_map(const FisheyeIntrinsics& K, const PinholeIntrinsics& target);

/// Cylindrical counterpart: vertical scene lines map to constant-u columns.
FlowField rectification_map(const FisheyeIntrinsics& K, const CylindricalSpec& target);

}  // namespace fisheyedist
