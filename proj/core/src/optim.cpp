#include "fisheyedist/optim.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fisheyedist {

namespace {

// Keeps the optimized distances in a physically sane band; mirrors the
// [0.1, 100] output range convention with generous slack.
constexpr double kMinDistance = 0.01;
constexpr double kMaxDistance = 1000.0;

}  // namespace

void OptimConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("OptimConfig: iterations must be >= 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("OptimConfig: step_size must be positive");
  if (!(init_distance > 0.0))
    throw std::invalid_argument("OptimConfig: init_distance must be positive");
  weights.validate();
}

LossGradient loss_gradient(const SequenceSnippet& snippet,
                           const std::vector<DistanceMap>& D_maps, const SnippetPoses& poses,
                           const LossWeights& weights) {
  weights.validate();
  const LossContext ctx(snippet, weights.n_scales, weights.alpha);
  LossGradient out;
  out.report = evaluate_loss(ctx, D_maps, poses, weights, &out.gradient);
  return out;
}

OptimResult optimize_distance(const SequenceSnippet& snippet, const SnippetPoses& poses,
                              const OptimConfig& config) {
  config.validate();
  const int N = snippet.count();
  if (N < 3) throw std::invalid_argument("optimize_distance: need at least three frames");
  for (const Pose& adj : poses.adjacent()) {
    if (adj.translation().norm() <= 1e-6)
      throw std::runtime_error("optimize_distance: degenerate baseline, cannot resolve scale");
  }

  const LossContext ctx(snippet, config.weights.n_scales, config.weights.alpha);
  const int w = snippet.intrinsics.width;
  const int h = snippet.intrinsics.height;

  // State per frame: log-distance or raw distance.
  std::vector<Grid> state(N, Grid(w, h, config.optimize_log_distance
                                          ? std::log(config.init_distance)
                                          : config.init_distance));
  if (!config.init_override.empty()) {
    if (static_cast<int>(config.init_override.size()) != N)
      throw std::invalid_argument("optimize_distance: init_override needs one map per frame");
    for (int f = 0; f < N; ++f) {
      const DistanceMap& init = config.init_override[f];
      if (init.width() != w || init.height() != h)
        throw std::invalid_argument("optimize_distance: init_override size mismatch");
      init.validate();
      for (int i = 0; i < w * h; ++i)
        state[f][i] = config.optimize_log_distance ? std::log(init[i]) : init[i];
    }
  }

  auto distances_from_state = [&]() {
    std::vector<DistanceMap> D;
    D.reserve(N);
    for (int f = 0; f < N; ++f) {
      DistanceMap m(w, h);
      for (int i = 0; i < m.size(); ++i) {
        const double d = config.optimize_log_distance ? std::exp(state[f][i]) : state[f][i];
        m[i] = std::clamp(d, kMinDistance, kMaxDistance);
      }
      D.push_back(std::move(m));
    }
    return D;
  };

  auto photometric_of = [](const LossReport& r) {
    double p = 0.0;
    for (std::size_t lvl = 0; lvl < r.scales.size(); ++lvl)
      p += (r.scales[lvl].photometric_forward + r.scales[lvl].photometric_backward) /
           static_cast<double>(1 << lvl);
    return p;
  };

  OptimResult result;
  std::vector<Grid> gradient;
  for (int it = 0; it < config.iterations; ++it) {
    LossWeights weights = config.weights;
    weights.automask_enabled =
        config.weights.automask_enabled && it >= config.weights.automask_warmup;
    const std::vector<DistanceMap> D = distances_from_state();
    const LossReport report = evaluate_loss(ctx, D, poses, weights, &gradient);
    result.loss_trace.push_back(report.total);
    result.photometric_trace.push_back(photometric_of(report));
    for (int f = 0; f < N; ++f) {
      for (int i = 0; i < w * h; ++i) {
        const double g =
            config.optimize_log_distance ? gradient[f][i] * D[f][i] : gradient[f][i];
        state[f][i] -= config.step_size * g;
        if (config.optimize_log_distance)
          state[f][i] = std::clamp(state[f][i], std::log(kMinDistance), std::log(kMaxDistance));
        else
          state[f][i] = std::clamp(state[f][i], kMinDistance, kMaxDistance);
      }
    }
  }

  std::vector<DistanceMap> final_D = distances_from_state();
  LossWeights final_weights = config.weights;
  final_weights.automask_enabled =
      config.weights.automask_enabled && config.iterations >= config.weights.automask_warmup;
  result.final_report = evaluate_loss(ctx, final_D, poses, final_weights, nullptr);
  result.loss_trace.push_back(result.final_report.total);
  result.photometric_trace.push_back(photometric_of(result.final_report));
  result.distance = final_D[N / 2];
  result.all_frames = std::move(final_D);
  return result;
}

GradCheckReport grad_check(const std::function<double(const std::vector<DistanceMap>&)>& loss_fn,
                           const std::vector<DistanceMap>& at,
                           const std::vector<Grid>& analytic_gradient, double epsilon,
                           int n_samples, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("grad_check: epsilon must be positive");
  if (at.empty() || at.size() != analytic_gradient.size())
    throw std::invalid_argument("grad_check: gradient/value frame count mismatch");
  if (n_samples < 1) throw std::invalid_argument("grad_check: need at least one sample");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> frame_dist(0, static_cast<int>(at.size()) - 1);

  GradCheckReport report;
  std::vector<double> errors;
  for (int s = 0; s < n_samples; ++s) {
    const int f = frame_dist(rng);
    std::uniform_int_distribution<int> idx_dist(0, at[f].size() - 1);
    const int i = idx_dist(rng);
    const double step = epsilon * at[f][i];

    std::vector<DistanceMap> plus = at;
    std::vector<DistanceMap> minus = at;
    plus[f][i] += step;
    minus[f][i] -= step;
    const double numeric = (loss_fn(plus) - loss_fn(minus)) / (2.0 * step);
    const double analytic = analytic_gradient[f][i];
    const double rel = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8});

    GradCheckSample sample{f, i % at[f].width(), i / at[f].width(), analytic, numeric, rel};
    if (errors.empty() || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = sample;
    }
    errors.push_back(rel);
    report.samples.push_back(sample);
  }
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  report.median_rel_error = sorted[(sorted.size() - 1) / 2];
  return report;
}

}  // namespace fisheyedist
