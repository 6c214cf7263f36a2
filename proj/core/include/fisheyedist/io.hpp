#pragma once

#include <filesystem>
#include <variant>
#include <vector>

#include "fisheyedist/camera.hpp"
#include "fisheyedist/image.hpp"
#include "fisheyedist/se3.hpp"
#include "fisheyedist/synth.hpp"

namespace fisheyedist {

/// Portable FloatMap, grayscale "Pf", little-endian (scale -1.0), bottom-up
/// row order. Round trips are bit-exact at float precision. Rejects
/// malformed headers, absurd dimensions, big-endian scales and non-finite
/// samples.
DistanceMap read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Grid& map);

/// Binary PGM (P5) and PPM (P6), 8-bit, mapped to [0,1] by /255. The format
/// is detected from the file magic, not the extension.
Image read_image(const std::filesystem::path& path);
/// P5 for single-channel images, P6 for three channels.
void write_image(const std::filesystem::path& path, const Image& image);

using Intrinsics = std::variant<FisheyeIntrinsics, PinholeIntrinsics>;

/// JSON object {model:"fisheye"|"pinhole", k:[k1..k4] or f:[fx,fy],
/// aspect:[ax,ay], principal:[cx,cy], size:[w,h], theta_max}. Missing or
/// inconsistent keys are rejected with a descriptive error.
Intrinsics read_intrinsics(const std::filesystem::path& path);
void write_intrinsics(const std::filesystem::path& path, const FisheyeIntrinsics& K);
void write_intrinsics(const std::filesystem::path& path, const PinholeIntrinsics& K);

/// JSON array of {t: seconds, v: m/s}.
std::vector<OdometrySample> read_odometry(const std::filesystem::path& path);
void write_odometry(const std::filesystem::path& path, const std::vector<OdometrySample>& samples);

/// One pose per line, "roll pitch yaw tx ty tz"; line i is frame i relative
/// to frame 0.
std::vector<Pose> read_pose_file(const std::filesystem::path& path);
void write_pose_file(const std::filesystem::path& path, const std::vector<Pose>& poses);

Scene read_scene(const std::filesystem::path& path);
void write_scene(const std::filesystem::path& path, const Scene& scene);

/// Snippet directory layout: frame_%03d.pgm/.ppm, frame_%03d_dist.pfm
/// (optional), intrinsics.json, odometry.json, poses.txt (optional).
SequenceSnippet read_bundle(const std::filesystem::path& dir);
void write_bundle(const std::filesystem::path& dir, const SequenceSnippet& snippet);

}  // namespace fisheyedist
