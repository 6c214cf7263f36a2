#pragma once

#include <vector>

#include "fisheyedist/camera.hpp"
#include "fisheyedist/image.hpp"
#include "fisheyedist/se3.hpp"

namespace fisheyedist {

/// Distance map -> one camera-frame point per pixel with ||point|| = D.
/// Pixels outside the calibrated image circle are flagged invalid.
PointCloud unproject_map(const DistanceMap& D, const FisheyeIntrinsics& K, const ThetaLUT& lut);

/// Transforms the cloud by T and projects into the source camera K. The
/// validity mask of the result is the ego mask: pixels are valid when the
/// source ray is within calibration and all four bilinear neighbors exist.
FlowField reproject(const PointCloud& cloud, const Pose& T, const FisheyeIntrinsics& K);

/// Backward warp: output(p) = bilinear read of src at flow(p); invalid
/// pixels produce 0 and are meant to be excluded via the mask downstream.
Image bilinear_sample(const Image& src, const FlowField& flow);

struct SynthesisResult {
  Image image;
  Mask mask;  // ego mask M
};

/// unproject_map -> reproject -> bilinear_sample.
SynthesisResult synthesize_view(const DistanceMap& D_target, const Image& I_source,
                                const Pose& target_to_source, const FisheyeIntrinsics& K,
                                const ThetaLUT& lut);

/// Analytic derivative of the reprojected source coordinates with respect to
/// the pixel's distance, d(u,v)/dD in pixels per meter. Throws when the warp
/// is invalid at (p, D).
Eigen::Vector2d warp_jacobian(const Pixel& p, double distance, const Pose& target_to_source,
                              const FisheyeIntrinsics& K, const ThetaLUT& lut);

// --- low-level pieces shared with the loss/optimizer fast path ---

struct BilinearTaps {
  int x0, y0;
  double w00, w10, w01, w11;
  double fx, fy;
};

/// Tap weights for a read at (u,v); caller guarantees sampling bounds
/// u in [0,w-1], v in [0,h-1].
BilinearTaps bilinear_taps(double u, double v, int width, int height);

double bilinear_grid(const Grid& g, const BilinearTaps& t);
inline double bilinear_grid(const Grid& g, double u, double v) {
  return bilinear_grid(g, bilinear_taps(u, v, g.width(), g.height()));
}

/// Per-pixel result of warping one target pixel into the source view, with
/// the derivatives the optimizer needs.
struct WarpedPoint {
  double u = 0.0, v = 0.0;       // source coordinates
  double du_dd = 0.0, dv_dd = 0.0;  // d(source coords)/d(distance)
  double dist = 0.0;             // ||T * (D * ray)||, distance seen from the source
  double ddist_dd = 0.0;         // d dist / d(distance)
  bool valid = false;
};

/// Warps every pixel of a distance grid given precomputed unit rays for the
/// target camera. Rays and D share the pixel grid of K_source-sized output.
std::vector<WarpedPoint> warp_points(const PointCloud& rays, const Grid& D,
                                     const Pose& target_to_source,
                                     const FisheyeIntrinsics& K_source);

}  // namespace fisheyedist
