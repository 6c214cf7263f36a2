#pragma once

#include <vector>

#include "fisheyedist/camera.hpp"
#include "fisheyedist/image.hpp"
#include "fisheyedist/se3.hpp"
#include "fisheyedist/synth.hpp"

namespace fisheyedist {

struct LossWeights {
  double alpha = 0.85;           // SSIM/L1 mix
  double beta = 0.001;           // smoothness weight
  double gamma = 0.001;          // distance consistency weight
  double clip_percentile = 95.0; // photometric clipping percentile
  int n_scales = 4;
  int automask_warmup = 200;     // optimizer iterations before omega activates
  bool automask_enabled = true;  // current activation state, managed by the optimizer
  bool smoothness_no_decay = false;  // exempt L_s from the per-scale 1/2^(n-1) decay

  void validate() const;
};

/// Windowed SSIM map in [-1,1] with 3x3 box statistics, C1 = 0.01^2,
/// C2 = 0.03^2 on [0,1] intensities. Window sums are renormalized over valid
/// pixels; masked pixels get 0. Multi-channel images average over channels.
Grid ssim(const Image& a, const Image& b, const Mask& valid);

/// pe = alpha*(1-SSIM)/2 + (1-alpha)*|target-recon|, zero outside the mask.
Grid photometric_error(const Image& target, const Image& recon, const Mask& valid, double alpha);

struct MinReprojection {
  double loss = 0.0;
  Grid per_pixel;                 // clipped per-pixel minimum, 0 where unsupervised
  std::vector<int> source_index;  // argmin per pixel, -1 where unsupervised
  Mask supervised;                // omega=1 and at least one valid source
  double clip_threshold = 0.0;    // nearest-rank percentile of surviving values
  Mask clipped;                   // pixels contributing the threshold, zero gradient
};

/// Per-pixel minimum across sources, percentile-clipped, averaged over the
/// supervised set. Ties pick the lowest source index. Throws
/// "no supervised pixels" when the set is empty.
MinReprojection min_reprojection(const std::vector<Grid>& pe, const std::vector<Mask>& valid,
                                 const Mask& omega, double clip_percentile);

/// Static-pixel filter: omega(p) = 1 iff the best warped reconstruction beats
/// the best unwarped source photometrically (strict inequality).
Mask automask(const Image& target, const std::vector<Image>& sources,
              const std::vector<Image>& recons, double alpha = 0.85);

/// Edge-aware smoothness on the mean-normalized inverse distance, forward
/// differences, per-axis means.
double smoothness_loss(const DistanceMap& D, const Image& I);

/// Relative poses of a snippet stored as adjacent forward transforms
/// T_{i->i+1}; arbitrary pairs are composed on demand.
class SnippetPoses {
 public:
  explicit SnippetPoses(std::vector<Pose> adjacent_forward);

  static SnippetPoses from_ground_truth(const SequenceSnippet& snippet);
  /// Ground-truth poses with each adjacent translation rescaled to the
  /// odometry displacement. Throws on a degenerate (near-zero) baseline.
  static SnippetPoses odometry_scaled(const SequenceSnippet& snippet);

  int frame_count() const { return static_cast<int>(adjacent_.size()) + 1; }
  const std::vector<Pose>& adjacent() const { return adjacent_; }

  /// T_{from->to}; composes adjacent transforms, inverting when from > to.
  Pose between(int from, int to) const;

 private:
  std::vector<Pose> adjacent_;
};

/// Cross-sequence distance consistency: both terms per ordered pair,
/// ego-masked, divided by the total valid pixel count.
double csdc_loss(const std::vector<DistanceMap>& D_maps, const SnippetPoses& poses,
                 const FisheyeIntrinsics& K);

struct ScaleLosses {
  double photometric_forward = 0.0;
  double photometric_backward = 0.0;
  double smoothness = 0.0;
  double distance_consistency = 0.0;
};

/// Per-warp diagnostics at the finest scale.
struct PairDiagnostics {
  int target = 0;
  int source = 0;
  Grid pe;
  Mask ego_mask;
};

/// Discrete selections made at one scale for one reconstruction target;
/// useful for checking selection stability around a linearization point.
struct TargetSelection {
  int target = 0;
  bool backward = false;
  Mask omega;
  std::vector<int> argmin;
  double clip_threshold = 0.0;
  Mask clipped;
};

struct LossReport {
  double total = 0.0;
  std::vector<ScaleLosses> scales;  // index 0 = finest
  LossWeights weights;

  std::vector<PairDiagnostics> pairs;                  // finest scale
  std::vector<std::vector<TargetSelection>> selections;  // [scale][target slot]

  /// Recombines the per-scale breakdown exactly as total_loss does.
  double recompute_total() const;
};

/// Per-scale constants reused across loss evaluations: intrinsics, lookup
/// tables, unit rays, image pyramids and the distance-independent
/// unwarped-source photometric errors the automask compares against.
class LossContext {
 public:
  LossContext(const SequenceSnippet& snippet, int n_scales, double alpha = 0.85);

  struct Level {
    FisheyeIntrinsics intrinsics;
    ThetaLUT lut;
    PointCloud rays;
    std::vector<Image> images;      // one per frame
    std::vector<Grid> static_pe;    // [target*N + source], empty when unused
  };

  int frame_count() const { return frame_count_; }
  int level_count() const { return static_cast<int>(levels_.size()); }
  double alpha() const { return alpha_; }
  const Level& level(int i) const { return levels_[i]; }

 private:
  int frame_count_;
  double alpha_;
  std::vector<Level> levels_;
};

/// Full multi-scale forward+backward objective. D_maps are full-resolution
/// per-frame distances; pyramids are derived by 2x2 averaging. When
/// gradient_out is non-null it receives dTotal/dD per frame at full
/// resolution (clipped photometric values and automasked pixels contribute
/// zero photometric gradient).
LossReport evaluate_loss(const LossContext& ctx, const std::vector<DistanceMap>& D_maps,
                         const SnippetPoses& poses, const LossWeights& weights,
                         std::vector<Grid>* gradient_out);

LossReport total_loss(const SequenceSnippet& snippet, const std::vector<DistanceMap>& D_maps,
                      const SnippetPoses& poses, const LossWeights& weights);

}  // namespace fisheyedist
