#include <benchmark/benchmark.h>

#include <random>

#include "fisheyedist/losses.hpp"
#include "fisheyedist/optim.hpp"
#include "fisheyedist/synth.hpp"
#include "fisheyedist/warp.hpp"

using namespace fisheyedist;

namespace {

FisheyeIntrinsics camera() { return reference_intrinsics(64, 40); }

Scene bench_scene() {
  Scene scene;
  Sphere room;
  room.center = {0, 0, 2};
  room.radius = 20.0;
  room.texture.kind = Texture::Kind::value_noise;
  room.texture.frequency = 0.2;
  room.texture.seed = 7;
  scene.spheres.push_back(room);
  return scene;
}

SequenceSnippet bench_snippet() {
  std::vector<TrajectoryPoint> trajectory;
  Pose cam_to_ref;
  const Pose step(0, 0, 0, {0.04, 0.02, 0.5});
  for (int i = 0; i < 3; ++i) {
    trajectory.push_back(TrajectoryPoint{cam_to_ref, 2.0});
    cam_to_ref = compose(cam_to_ref, step);
  }
  return make_snippet(bench_scene(), camera(), trajectory);
}

}  // namespace

static void BM_ProjectFisheye(benchmark::State& state) {
  const FisheyeIntrinsics K = camera();
  const Point3 X{1.2, -0.3, 4.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(project_fisheye(X, K));
  }
}
BENCHMARK(BM_ProjectFisheye);

static void BM_SolveTheta(benchmark::State& state) {
  const FisheyeIntrinsics K = camera();
  const double rho = 0.6 * K.rho_max();
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_theta(rho, K));
  }
}
BENCHMARK(BM_SolveTheta);

static void BM_LutQuery(benchmark::State& state) {
  const FisheyeIntrinsics K = camera();
  const ThetaLUT lut = build_theta_lut(K);
  const double rho = 0.6 * lut.max_radius();
  for (auto _ : state) {
    benchmark::DoNotOptimize(lut(rho));
  }
}
BENCHMARK(BM_LutQuery);

static void BM_BuildThetaLut(benchmark::State& state) {
  const FisheyeIntrinsics K = camera();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_theta_lut(K, static_cast<int>(state.range(0))));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildThetaLut)->Range(256, 16384)->Complexity();

static void BM_SynthesizeView(benchmark::State& state) {
  const FisheyeIntrinsics K = camera();
  const ThetaLUT lut = build_theta_lut(K);
  const RenderResult rendered = render(bench_scene(), K, Pose::identity(), lut);
  const Pose T(0, 0, 0, {0.02, 0.01, -0.4});
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize_view(rendered.distance, rendered.image, T, K, lut));
  }
}
BENCHMARK(BM_SynthesizeView);

static void BM_TotalLoss(benchmark::State& state) {
  const SequenceSnippet snippet = bench_snippet();
  const SnippetPoses poses = SnippetPoses::odometry_scaled(snippet);
  LossWeights weights;
  const LossContext ctx(snippet, weights.n_scales, weights.alpha);
  std::vector<DistanceMap> D;
  for (const auto& f : snippet.frames) D.push_back(*f.gt_distance);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_loss(ctx, D, poses, weights, nullptr));
  }
}
BENCHMARK(BM_TotalLoss);

static void BM_LossGradient(benchmark::State& state) {
  const SequenceSnippet snippet = bench_snippet();
  const SnippetPoses poses = SnippetPoses::odometry_scaled(snippet);
  LossWeights weights;
  const LossContext ctx(snippet, weights.n_scales, weights.alpha);
  std::vector<DistanceMap> D;
  for (const auto& f : snippet.frames) D.push_back(*f.gt_distance);
  std::vector<Grid> gradient;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_loss(ctx, D, poses, weights, &gradient));
  }
}
BENCHMARK(BM_LossGradient);

BENCHMARK_MAIN();
