#pragma once

// Shared fixtures: hand-checkable intrinsics, synthetic scenes with full ray
// coverage, and the evaluation mask used by the recovery checks.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "fisheyedist/losses.hpp"
#include "fisheyedist/synth.hpp"
#include "fisheyedist/warp.hpp"

namespace testutil {

using namespace fisheyedist;

// rho(theta) = theta, aspect 1, principal point at the origin; projections
// can be evaluated by hand.
inline FisheyeIntrinsics unit_intrinsics(int width = 2, int height = 2,
                                         double theta_max = std::numbers::pi / 2) {
  return FisheyeIntrinsics(1, 0, 0, 0, 1, 1, 0, 0, width, height, theta_max);
}

inline Texture noise_texture(double frequency, std::uint32_t seed, double contrast = 1.0,
                             int octaves = 2) {
  Texture t;
  t.kind = Texture::Kind::value_noise;
  t.frequency = frequency;
  t.contrast = contrast;
  t.base = 0.5;
  t.octaves = octaves;  // little sub-pixel content even at desk resolutions
  t.seed = seed;
  return t;
}

// Camera inside a large textured sphere: every ray hits a smooth surface, so
// cross-view distance fields are nearly linear in pixel coordinates.
inline Scene sphere_room_scene() {
  Scene scene;
  scene.background_distance = 50.0;
  Sphere room;
  room.center = {0.0, 0.0, 2.0};
  room.radius = 10.0;
  room.texture = noise_texture(0.25, 7);
  scene.spheres.push_back(room);
  return scene;
}

// Textured plane + sphere in front of the camera, enclosed by a textured
// sphere so that the full fisheye field of view sees real geometry.
inline Scene recovery_scene() {
  Scene scene;
  scene.background_distance = 40.0;
  // Single-octave textures stay resolvable when the scene scale doubles.
  Sphere room;
  room.center = {0.0, 0.0, 1.0};
  room.radius = 7.5;
  room.texture = noise_texture(0.2, 7, 1.0, 1);
  scene.spheres.push_back(room);

  Sphere ball;
  ball.center = {0.9, 0.3, 3.2};
  ball.radius = 1.0;
  ball.texture = noise_texture(0.4, 11, 1.0, 1);
  scene.spheres.push_back(ball);

  Plane slab;
  slab.point = {-0.9, -0.3, 4.5};
  slab.normal = Eigen::Vector3d(0.25, -0.15, -1.0).normalized();
  slab.half_u = 2.2;
  slab.half_v = 1.6;
  slab.texture = noise_texture(0.32, 23, 1.0, 1);
  scene.planes.push_back(slab);
  return scene;
}

inline std::vector<TrajectoryPoint> forward_trajectory(int frames,
                                                       const Eigen::Vector3d& step_translation,
                                                       const Eigen::Vector3d& step_rpy,
                                                       double speed) {
  std::vector<TrajectoryPoint> trajectory;
  Pose cam_to_ref;
  const Pose step(step_rpy.x(), step_rpy.y(), step_rpy.z(), step_translation);
  for (int i = 0; i < frames; ++i) {
    trajectory.push_back(TrajectoryPoint{cam_to_ref, speed});
    cam_to_ref = compose(cam_to_ref, step);
  }
  return trajectory;
}

inline SequenceSnippet recovery_snippet(int width = 64, int height = 40, int frames = 3) {
  return make_snippet(recovery_scene(), reference_intrinsics(width, height),
                      forward_trajectory(frames, {0.06, 0.03, 0.8}, {0.004, -0.003, 0.002}, 2.0));
}

// Pixels of the middle frame that are warp-valid in every other frame,
// pass the ground-truth cross-view distance agreement (non-occluded) and
// carry image texture.
inline Mask evaluation_mask(const SequenceSnippet& snippet, double occlusion_tol = 0.03,
                            double texture_floor = 0.01) {
  const int N = snippet.count();
  const int mid = N / 2;
  const FisheyeIntrinsics& K = snippet.intrinsics;
  const ThetaLUT lut = build_theta_lut(K);
  const PointCloud rays = unproject_rays(K, lut);
  const DistanceMap& D_mid = *snippet.frames[mid].gt_distance;

  Mask mask(K.width, K.height, true);
  for (int s = 0; s < N; ++s) {
    if (s == mid) continue;
    const Pose T = snippet.relative_pose(mid, s);
    const auto warped = warp_points(rays, D_mid, T, K);
    const DistanceMap& D_s = *snippet.frames[s].gt_distance;
    for (int i = 0; i < K.width * K.height; ++i) {
      if (!warped[i].valid) {
        mask[i] = 0;
        continue;
      }
      const double read = bilinear_grid(D_s, bilinear_taps(warped[i].u, warped[i].v, K.width,
                                                           K.height));
      if (std::abs(warped[i].dist - read) / warped[i].dist > occlusion_tol) mask[i] = 0;
    }
  }
  const Image& I = snippet.frames[mid].image;
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const int xn = std::min(x + 1, K.width - 1);
      const int yn = std::min(y + 1, K.height - 1);
      double g = 0.0;
      for (int c = 0; c < I.channels(); ++c)
        g += std::abs(I.at(xn, y, c) - I.at(x, y, c)) + std::abs(I.at(x, yn, c) - I.at(x, y, c));
      if (g / I.channels() < texture_floor) mask.at(x, y) = 0;
    }
  }
  return mask;
}

inline double median_relative_error(const DistanceMap& pred, const DistanceMap& gt,
                                    const Mask& mask) {
  std::vector<double> errors;
  for (int i = 0; i < pred.size(); ++i)
    if (mask[i]) errors.push_back(std::abs(pred[i] - gt[i]) / gt[i]);
  if (errors.empty()) throw std::runtime_error("median_relative_error: empty evaluation mask");
  std::sort(errors.begin(), errors.end());
  return errors[(errors.size() - 1) / 2];
}

}  // namespace testutil
