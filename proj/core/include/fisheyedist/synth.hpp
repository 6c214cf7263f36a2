#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fisheyedist/camera.hpp"
#include "fisheyedist/image.hpp"
#include "fisheyedist/se3.hpp"

namespace fisheyedist {

/// Procedural texture evaluated on world coordinates, values in [0,1].
struct Texture {
  enum class Kind { constant, checker, value_noise };

  Kind kind = Kind::constant;
  double frequency = 1.0;  // cells per meter
  double contrast = 1.0;   // peak-to-peak spread around base
  double base = 0.5;
  int octaves = 3;         // value_noise only
  std::uint32_t seed = 0;

  double value(const Point3& p) const;
};

struct Plane {
  Point3 point = Point3::Zero();
  Eigen::Vector3d normal = -Eigen::Vector3d::UnitZ();
  double half_u = 0.0;  // in-plane half extents; <= 0 means unbounded
  double half_v = 0.0;
  Texture texture;
};

struct Sphere {
  Point3 center = Point3::Zero();
  double radius = 1.0;
  Texture texture;
};

struct Box {
  Point3 min = Point3::Zero();
  Point3 max = Point3::Ones();
  Texture texture;
};

struct Scene {
  std::vector<Plane> planes;
  std::vector<Sphere> spheres;
  std::vector<Box> boxes;
  double background_distance = 100.0;
  double background_intensity = 0.5;
};

/// Nearest ray hit; distance is Euclidean along the unit direction.
struct RayHit {
  double distance = 0.0;
  double intensity = 0.0;
  bool hit = false;
};
RayHit trace_ray(const Scene& scene, const Point3& origin, const Eigen::Vector3d& unit_dir);

struct RenderResult {
  Image image;
  DistanceMap distance;
};

/// Ray-casts the scene through the fisheye model at the given camera pose
/// (camera-to-world). Pixels outside the calibrated image circle and ray
/// misses are filled with the scene background.
RenderResult render(const Scene& scene, const FisheyeIntrinsics& K, const Pose& cam_to_world,
                    const ThetaLUT& lut);
RenderResult render(const Scene& scene, const FisheyeIntrinsics& K, const Pose& cam_to_world);

struct SnippetFrame {
  Image image;
  std::optional<DistanceMap> gt_distance;
  std::optional<Pose> cam_to_ref;  // camera-to-frame-1
  OdometrySample odometry;
};

/// N-frame training snippet: images, ground truth where available, odometry,
/// shared intrinsics.
struct SequenceSnippet {
  explicit SequenceSnippet(const FisheyeIntrinsics& K) : intrinsics(K) {}

  FisheyeIntrinsics intrinsics;
  std::vector<SnippetFrame> frames;

  int count() const { return static_cast<int>(frames.size()); }

  /// T_{from->to} composed from ground-truth frame poses; throws when a
  /// frame lacks one.
  Pose relative_pose(int from, int to) const;

  /// Trapezoidal odometry displacement between adjacent frames i and i+1.
  double adjacent_displacement(int i) const;
};

struct TrajectoryPoint {
  Pose cam_to_ref;
  double speed = 0.0;  // m/s at this frame
};

/// Renders every trajectory frame and attaches ground truth plus odometry
/// timestamps consistent with the trapezoidal displacement rule.
SequenceSnippet make_snippet(const Scene& scene, const FisheyeIntrinsics& K,
                             const std::vector<TrajectoryPoint>& trajectory);

/// Checks the snippet invariant ||t_{i->i+1}|| == odometry displacement
/// within 1e-9; throws on violation or missing poses.
void validate_odometry_consistency(const SequenceSnippet& snippet);

/// Harness default camera: quartic polynomial (320, -15, 0.8, -0.02) and
/// theta_max = 1.745 rad, rescaled so the calibrated image circle just
/// covers the image diagonal at the requested resolution.
FisheyeIntrinsics reference_intrinsics(int width, int height);

}  // namespace fisheyedist
