#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fisheyedist/losses.hpp"

namespace fisheyedist {

struct OptimConfig {
  int iterations = 2000;
  double step_size = 1.0;
  double init_distance = 5.0;  // meters, constant init
  LossWeights weights;
  bool optimize_log_distance = true;
  std::uint64_t seed = 0;
  std::vector<DistanceMap> init_override;  // per-frame init instead of the constant

  void validate() const;
};

struct LossGradient {
  LossReport report;
  std::vector<Grid> gradient;  // dTotal/dD per frame, full resolution
};

/// Exact gradient of the implemented multi-scale objective with respect to
/// every distance entry of every frame. Clipped photometric values and
/// automasked pixels contribute zero photometric gradient.
LossGradient loss_gradient(const SequenceSnippet& snippet,
                           const std::vector<DistanceMap>& D_maps, const SnippetPoses& poses,
                           const LossWeights& weights);

struct OptimResult {
  DistanceMap distance;                  // middle (target) frame
  std::vector<DistanceMap> all_frames;
  std::vector<double> loss_trace;        // total objective, length iterations+1
  std::vector<double> photometric_trace; // decayed L_p^f + L_p^b, same length
  LossReport final_report;
};

/// Fixed-step gradient descent on the per-pixel distances of every frame
/// (log-distance parameterization by default, which keeps D positive).
/// Deterministic in sequential mode. Throws on a degenerate pose baseline.
OptimResult optimize_distance(const SequenceSnippet& snippet, const SnippetPoses& poses,
                              const OptimConfig& config);

struct GradCheckSample {
  int frame = 0;
  int x = 0, y = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double median_rel_error = 0.0;
  GradCheckSample worst;
  std::vector<GradCheckSample> samples;
};

/// Central-difference check of an analytic gradient at n randomly sampled
/// entries. epsilon is relative: each entry is perturbed by epsilon * D.
/// Throws when epsilon <= 0.
GradCheckReport grad_check(const std::function<double(const std::vector<DistanceMap>&)>& loss_fn,
                           const std::vector<DistanceMap>& at,
                           const std::vector<Grid>& analytic_gradient, double epsilon,
                           int n_samples, std::uint64_t seed);

}  // namespace fisheyedist
