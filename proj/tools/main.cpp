// Command line surface for the fisheye distance toolkit. Every successful
// subcommand prints a single JSON document on stdout. Exit codes: 0 success,
// 1 usage error, 2 data error.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fisheyedist/io.hpp"
#include "fisheyedist/losses.hpp"
#include "fisheyedist/metrics.hpp"
#include "fisheyedist/optim.hpp"
#include "fisheyedist/synth.hpp"
#include "fisheyedist/warp.hpp"

namespace fd = fisheyedist;
using nlohmann::json;

namespace {

int feasible_scales(int width, int height) {
  int n = 1;
  while (n < 4 && width >= 4 && height >= 4) {
    width /= 2;
    height /= 2;
    ++n;
  }
  return n;
}

fd::SnippetPoses poses_from_bundle(const fd::SequenceSnippet& snippet, const std::string& policy,
                                   double dx_scale) {
  if (policy == "file") {
    if (dx_scale != 1.0)
      throw std::runtime_error("--dx-scale requires --poses scaled");
    return fd::SnippetPoses::from_ground_truth(snippet);
  }
  if (policy == "scaled") {
    std::vector<fd::Pose> adjacent;
    for (int i = 0; i + 1 < snippet.count(); ++i) {
      const double dx = snippet.adjacent_displacement(i) * dx_scale;
      adjacent.push_back(fd::scale_pose(snippet.relative_pose(i, i + 1), dx));
    }
    return fd::SnippetPoses(std::move(adjacent));
  }
  throw std::runtime_error("unknown pose policy \"" + policy + "\" (use file or scaled)");
}

json loss_report_json(const fd::LossReport& r) {
  json scales = json::array();
  for (const fd::ScaleLosses& s : r.scales)
    scales.push_back({{"photometric_forward", s.photometric_forward},
                      {"photometric_backward", s.photometric_backward},
                      {"smoothness", s.smoothness},
                      {"distance_consistency", s.distance_consistency}});
  return json{{"total", r.total}, {"scales", scales}};
}

void write_mask_image(const std::filesystem::path& path, const fd::Mask& mask) {
  fd::Image img(mask.width(), mask.height(), 1);
  for (int i = 0; i < mask.size(); ++i) img.data()[i] = mask[i] ? 1.0 : 0.0;
  fd::write_image(path, img);
}

// Final-state diagnostic maps: per-pair photometric error and ego mask, plus
// the per-target automask at the finest scale.
void write_diagnostics(const std::filesystem::path& dir, const fd::LossReport& report) {
  std::filesystem::create_directories(dir);
  char name[64];
  for (const fd::PairDiagnostics& pair : report.pairs) {
    fd::Image pe(pair.pe.width(), pair.pe.height(), 1);
    for (int i = 0; i < pair.pe.size(); ++i) pe.data()[i] = std::clamp(pair.pe[i], 0.0, 1.0);
    std::snprintf(name, sizeof(name), "pe_t%d_s%d.pgm", pair.target, pair.source);
    fd::write_image(dir / name, pe);
    std::snprintf(name, sizeof(name), "mask_t%d_s%d.pgm", pair.target, pair.source);
    write_mask_image(dir / name, pair.ego_mask);
  }
  if (!report.selections.empty()) {
    for (const fd::TargetSelection& sel : report.selections.front()) {
      std::snprintf(name, sizeof(name), "omega_t%d_%s.pgm", sel.target,
                    sel.backward ? "bwd" : "fwd");
      write_mask_image(dir / name, sel.omega);
    }
  }
}

json metrics_json(const fd::MetricsReport& r) {
  return json{{"abs_rel", r.abs_rel},   {"sq_rel", r.sq_rel},
              {"rmse", r.rmse},         {"rmse_log", r.rmse_log},
              {"delta1", r.delta1},     {"delta2", r.delta2},
              {"delta3", r.delta3},     {"n_pixels", r.n_pixels},
              {"cap", r.cap},           {"median_scaled", r.median_scaled}};
}

struct ProjectArgs {
  std::string intrinsics;
  std::vector<double> point;
};

struct UnprojectArgs {
  std::string intrinsics;
  std::vector<double> pixel;
  double distance = 1.0;
};

struct RectifyArgs {
  std::string intrinsics, input, output;
  std::string mode = "rectilinear";
  int width = 0, height = 0;
  double fov_deg = 90.0;
  double vfov_deg = 90.0;
};

struct RenderArgs {
  std::string scene, intrinsics, out_dir;
  int frames = 3;
  std::string motion = "0 0 0 0 0 0.5";
  double speed = 2.0;
};

struct WarpArgs {
  std::string bundle;
  int target = 1, source = 0;
  std::string pose;
  std::string out, out_mask;
};

struct OptimizeArgs {
  std::string bundle, out, trace, diagnostics;
  int iterations = 2000;
  double step = 500.0;
  double init = 5.0;
  int scales = 0;
  std::string poses = "scaled";
  double dx_scale = 1.0;
  bool no_log_param = false;
  std::uint64_t seed = 0;
};

struct GradcheckArgs {
  std::string bundle;
  int samples = 50;
  double epsilon = 1e-4;
  int scales = 0;
  double init = 5.0;
  bool constant_init = false;
  std::string poses = "scaled";
  std::uint64_t seed = 0;
};

struct EvalArgs {
  std::string pred, gt;
  double cap = 80.0;
  bool median_scale = false;
};

int run_project(const ProjectArgs& a) {
  const fd::Intrinsics K = fd::read_intrinsics(a.intrinsics);
  const fd::Point3 X(a.point[0], a.point[1], a.point[2]);
  const fd::PixelProjection p = std::holds_alternative<fd::FisheyeIntrinsics>(K)
                                    ? fd::project_fisheye(X, std::get<fd::FisheyeIntrinsics>(K))
                                    : fd::project_pinhole(X, std::get<fd::PinholeIntrinsics>(K));
  std::cout << json{{"u", p.pixel.x()}, {"v", p.pixel.y()}, {"valid", p.valid}}.dump() << "\n";
  return 0;
}

int run_unproject(const UnprojectArgs& a) {
  const fd::Intrinsics K = fd::read_intrinsics(a.intrinsics);
  const fd::Pixel pix(a.pixel[0], a.pixel[1]);
  fd::Point3 X;
  if (const auto* fisheye = std::get_if<fd::FisheyeIntrinsics>(&K)) {
    const fd::ThetaLUT lut = fd::build_theta_lut(*fisheye);
    X = fd::unproject_fisheye(pix, a.distance, *fisheye, lut);
  } else {
    X = fd::unproject_pinhole(pix, a.distance, std::get<fd::PinholeIntrinsics>(K));
  }
  std::cout << json{{"x", X.x()}, {"y", X.y()}, {"z", X.z()}}.dump() << "\n";
  return 0;
}

int run_rectify(const RectifyArgs& a) {
  const fd::Intrinsics Kv = fd::read_intrinsics(a.intrinsics);
  const auto* K = std::get_if<fd::FisheyeIntrinsics>(&Kv);
  if (K == nullptr) throw std::runtime_error("rectify needs fisheye intrinsics");
  const fd::Image input = fd::read_image(a.input);
  if (input.width() != K->width || input.height() != K->height)
    throw std::runtime_error("input image does not match the intrinsics size");
  const int tw = a.width > 0 ? a.width : K->width;
  const int th = a.height > 0 ? a.height : K->height;

  fd::FlowField grid = [&] {
    if (a.mode == "rectilinear") {
      const double f = (tw / 2.0) / std::tan(a.fov_deg * std::numbers::pi / 360.0);
      return fd::rectification_map(
          *K, fd::PinholeIntrinsics(f, f, (tw - 1) / 2.0, (th - 1) / 2.0, tw, th));
    }
    if (a.mode == "cylindrical") {
      const double f_psi = tw / (a.fov_deg * std::numbers::pi / 180.0);
      const double f_y = (th / 2.0) / std::tan(a.vfov_deg * std::numbers::pi / 360.0);
      return fd::rectification_map(
          *K, fd::CylindricalSpec{f_psi, f_y, (tw - 1) / 2.0, (th - 1) / 2.0, tw, th});
    }
    throw std::runtime_error("unknown mode \"" + a.mode + "\" (rectilinear or cylindrical)");
  }();

  fd::write_image(a.output, fd::bilinear_sample(input, grid));
  std::cout << json{{"output", a.output}, {"valid_fraction", grid.valid.fraction()}}.dump()
            << "\n";
  return 0;
}

int run_render(const RenderArgs& a) {
  const fd::Scene scene = fd::read_scene(a.scene);
  const fd::Intrinsics Kv = fd::read_intrinsics(a.intrinsics);
  const auto* K = std::get_if<fd::FisheyeIntrinsics>(&Kv);
  if (K == nullptr) throw std::runtime_error("render needs fisheye intrinsics");
  if (a.frames < 2) throw std::runtime_error("render needs at least 2 frames");
  const fd::Pose step = fd::parse_pose(a.motion);
  std::vector<fd::TrajectoryPoint> trajectory;
  fd::Pose cam_to_ref;
  for (int i = 0; i < a.frames; ++i) {
    trajectory.push_back(fd::TrajectoryPoint{cam_to_ref, a.speed});
    cam_to_ref = fd::compose(cam_to_ref, step);
  }
  const fd::SequenceSnippet snippet = fd::make_snippet(scene, *K, trajectory);
  fd::write_bundle(a.out_dir, snippet);
  std::cout << json{{"dir", a.out_dir},
                    {"frames", a.frames},
                    {"width", K->width},
                    {"height", K->height}}
                   .dump()
            << "\n";
  return 0;
}

int run_warp(const WarpArgs& a) {
  const fd::SequenceSnippet snippet = fd::read_bundle(a.bundle);
  if (a.target < 0 || a.target >= snippet.count() || a.source < 0 ||
      a.source >= snippet.count() || a.target == a.source)
    throw std::runtime_error("invalid target/source frame indices");
  const fd::SnippetFrame& target = snippet.frames[a.target];
  if (!target.gt_distance)
    throw std::runtime_error("warp needs the target frame distance map (frame_###_dist.pfm)");
  const fd::Pose T = a.pose.empty() ? snippet.relative_pose(a.target, a.source)
                                    : fd::parse_pose(a.pose);
  const fd::ThetaLUT lut = fd::build_theta_lut(snippet.intrinsics);
  const fd::SynthesisResult synth = fd::synthesize_view(
      *target.gt_distance, snippet.frames[a.source].image, T, snippet.intrinsics, lut);
  if (!a.out.empty()) fd::write_image(a.out, synth.image);
  if (!a.out_mask.empty()) {
    fd::Image mask_img(synth.mask.width(), synth.mask.height(), 1);
    for (int i = 0; i < synth.mask.size(); ++i) mask_img.data()[i] = synth.mask[i] ? 1.0 : 0.0;
    fd::write_image(a.out_mask, mask_img);
  }
  double mean_abs = 0.0;
  int n = 0;
  for (int y = 0; y < synth.mask.height(); ++y)
    for (int x = 0; x < synth.mask.width(); ++x) {
      if (!synth.mask.at(x, y)) continue;
      for (int c = 0; c < target.image.channels(); ++c)
        mean_abs += std::abs(synth.image.at(x, y, c) - target.image.at(x, y, c));
      n += target.image.channels();
    }
  std::cout << json{{"valid_fraction", synth.mask.fraction()},
                    {"mean_abs_error", n > 0 ? mean_abs / n : 0.0}}
                   .dump()
            << "\n";
  return 0;
}

int run_optimize(const OptimizeArgs& a) {
  const fd::SequenceSnippet snippet = fd::read_bundle(a.bundle);
  const fd::SnippetPoses poses = poses_from_bundle(snippet, a.poses, a.dx_scale);
  fd::OptimConfig cfg;
  cfg.iterations = a.iterations;
  cfg.step_size = a.step;
  cfg.init_distance = a.init;
  cfg.optimize_log_distance = !a.no_log_param;
  cfg.seed = a.seed;
  cfg.weights.n_scales = a.scales > 0
                             ? a.scales
                             : feasible_scales(snippet.intrinsics.width, snippet.intrinsics.height);
  const fd::OptimResult result = fd::optimize_distance(snippet, poses, cfg);
  fd::write_pfm(a.out, result.distance);
  if (!a.trace.empty()) {
    std::ofstream trace(a.trace);
    if (!trace) throw std::runtime_error(a.trace + ": cannot open for writing");
    trace << json{{"loss", result.loss_trace}, {"photometric", result.photometric_trace}}.dump(2)
          << "\n";
  }
  if (!a.diagnostics.empty()) write_diagnostics(a.diagnostics, result.final_report);
  json out{{"out", a.out},
           {"iterations", a.iterations},
           {"initial_loss", result.loss_trace.front()},
           {"final_loss", result.loss_trace.back()},
           {"initial_photometric", result.photometric_trace.front()},
           {"final_photometric", result.photometric_trace.back()},
           {"final_report", loss_report_json(result.final_report)}};
  const fd::SnippetFrame& mid = snippet.frames[snippet.count() / 2];
  if (mid.gt_distance)
    out["metrics_vs_gt"] = metrics_json(fd::evaluate(result.distance, *mid.gt_distance, 80.0,
                                                     false));
  std::cout << out.dump() << "\n";
  return 0;
}

int run_gradcheck(const GradcheckArgs& a) {
  const fd::SequenceSnippet snippet = fd::read_bundle(a.bundle);
  const fd::SnippetPoses poses = poses_from_bundle(snippet, a.poses, 1.0);
  fd::LossWeights weights;
  weights.n_scales = a.scales > 0
                         ? a.scales
                         : feasible_scales(snippet.intrinsics.width, snippet.intrinsics.height);
  std::vector<fd::DistanceMap> D;
  for (const fd::SnippetFrame& f : snippet.frames) {
    if (f.gt_distance && !a.constant_init)
      D.push_back(*f.gt_distance);
    else
      D.emplace_back(snippet.intrinsics.width, snippet.intrinsics.height, a.init);
  }
  const fd::LossGradient lg = fd::loss_gradient(snippet, D, poses, weights);
  const auto loss_fn = [&](const std::vector<fd::DistanceMap>& maps) {
    return fd::total_loss(snippet, maps, poses, weights).total;
  };
  const fd::GradCheckReport report =
      fd::grad_check(loss_fn, D, lg.gradient, a.epsilon, a.samples, a.seed);
  std::cout << json{{"max_rel_error", report.max_rel_error},
                    {"median_rel_error", report.median_rel_error},
                    {"worst",
                     {{"frame", report.worst.frame},
                      {"x", report.worst.x},
                      {"y", report.worst.y},
                      {"analytic", report.worst.analytic},
                      {"numeric", report.worst.numeric}}},
                    {"samples", a.samples}}
                   .dump()
            << "\n";
  return 0;
}

int run_eval(const EvalArgs& a) {
  const fd::DistanceMap pred = fd::read_pfm(a.pred);
  const fd::DistanceMap gt = fd::read_pfm(a.gt);
  std::cout << metrics_json(fd::evaluate(pred, gt, a.cap, a.median_scale)).dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised scale-aware fisheye distance estimation toolkit"};
  app.require_subcommand(1);

  ProjectArgs project_args;
  auto* project = app.add_subcommand("project", "Project a camera-frame point to a pixel");
  project->add_option("--intrinsics", project_args.intrinsics, "Intrinsics JSON")->required();
  project->add_option("--point", project_args.point, "Camera-frame point x y z")
      ->expected(3)
      ->required();

  UnprojectArgs unproject_args;
  auto* unproject =
      app.add_subcommand("unproject", "Lift a pixel to a camera-frame point at a distance");
  unproject->add_option("--intrinsics", unproject_args.intrinsics, "Intrinsics JSON")->required();
  unproject->add_option("--pixel", unproject_args.pixel, "Pixel u v")->expected(2)->required();
  unproject
      ->add_option("--distance", unproject_args.distance,
                   "Euclidean distance (fisheye) or depth (pinhole), meters")
      ->required();

  RectifyArgs rectify_args;
  auto* rectify = app.add_subcommand("rectify", "Undistort a fisheye image");
  rectify->add_option("--intrinsics", rectify_args.intrinsics, "Fisheye intrinsics JSON")
      ->required();
  rectify->add_option("--input", rectify_args.input, "Input PGM/PPM")->required();
  rectify->add_option("--output", rectify_args.output, "Output image path")->required();
  rectify->add_option("--mode", rectify_args.mode, "rectilinear or cylindrical");
  rectify->add_option("--width", rectify_args.width, "Target width (default: source)");
  rectify->add_option("--height", rectify_args.height, "Target height (default: source)");
  rectify->add_option("--fov-deg", rectify_args.fov_deg, "Horizontal FOV of the target viewport");
  rectify->add_option("--vfov-deg", rectify_args.vfov_deg, "Vertical FOV (cylindrical mode)");

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "Ray-cast a synthetic scene into a snippet bundle");
  render->add_option("--scene", render_args.scene, "Scene JSON")->required();
  render->add_option("--intrinsics", render_args.intrinsics, "Fisheye intrinsics JSON")
      ->required();
  render->add_option("--out", render_args.out_dir, "Output bundle directory")->required();
  render->add_option("--frames", render_args.frames, "Number of frames");
  render->add_option("--motion", render_args.motion,
                     "Per-frame pose increment \"roll pitch yaw tx ty tz\"");
  render->add_option("--speed", render_args.speed, "Vehicle speed, m/s");

  WarpArgs warp_args;
  auto* warp = app.add_subcommand("warp", "Synthesize a view from a bundle frame");
  warp->add_option("--bundle", warp_args.bundle, "Snippet bundle directory")->required();
  warp->add_option("--target", warp_args.target, "Target frame index")->required();
  warp->add_option("--source", warp_args.source, "Source frame index")->required();
  warp->add_option("--pose", warp_args.pose,
                   "Override pose \"roll pitch yaw tx ty tz\" (target to source)");
  warp->add_option("--out", warp_args.out, "Reconstruction image path");
  warp->add_option("--out-mask", warp_args.out_mask, "Ego-mask image path");

  OptimizeArgs optimize_args;
  auto* optimize =
      app.add_subcommand("optimize", "Recover a metric distance map by direct optimization");
  optimize->add_option("--bundle", optimize_args.bundle, "Snippet bundle directory")->required();
  optimize->add_option("--out", optimize_args.out, "Recovered distance map (PFM)")->required();
  optimize->add_option("--trace", optimize_args.trace, "Per-iteration loss trace JSON");
  optimize->add_option("--diagnostics", optimize_args.diagnostics,
                       "Directory for final pe/omega/ego-mask images");
  optimize->add_option("--iterations", optimize_args.iterations, "Gradient descent iterations");
  optimize->add_option("--step", optimize_args.step, "Step size");
  optimize->add_option("--init", optimize_args.init, "Constant distance init, meters");
  optimize->add_option("--scales", optimize_args.scales, "Pyramid scales (default: auto)");
  optimize->add_option("--poses", optimize_args.poses,
                       "Pose source: file (as stored) or scaled (odometry-scaled)");
  optimize->add_option("--dx-scale", optimize_args.dx_scale,
                       "Multiply odometry displacements (with --poses scaled)");
  optimize->add_flag("--no-log-param", optimize_args.no_log_param,
                     "Optimize raw distances instead of log distances");
  optimize->add_option("--seed", optimize_args.seed, "Run seed");

  GradcheckArgs gradcheck_args;
  auto* gradcheck =
      app.add_subcommand("gradcheck", "Finite-difference check of the objective gradient");
  gradcheck->add_option("--bundle", gradcheck_args.bundle, "Snippet bundle directory")
      ->required();
  gradcheck->add_option("--samples", gradcheck_args.samples, "Sampled entries");
  gradcheck->add_option("--epsilon", gradcheck_args.epsilon, "Relative FD step");
  gradcheck->add_option("--scales", gradcheck_args.scales, "Pyramid scales (default: auto)");
  gradcheck->add_option("--init", gradcheck_args.init, "Distance init when no ground truth");
  gradcheck->add_flag("--constant-init", gradcheck_args.constant_init,
                      "Linearize at the constant init even when ground truth exists");
  gradcheck->add_option("--poses", gradcheck_args.poses, "Pose source: file or scaled");
  gradcheck->add_option("--seed", gradcheck_args.seed, "Sampling seed");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Distance metrics between two PFM maps");
  eval->add_option("pred", eval_args.pred, "Predicted distance PFM")->required();
  eval->add_option("gt", eval_args.gt, "Ground-truth distance PFM")->required();
  eval->add_option("--cap", eval_args.cap, "Distance cap, meters");
  eval->add_flag("--median-scale", eval_args.median_scale, "Median ground-truth scaling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (project->parsed()) return run_project(project_args);
    if (unproject->parsed()) return run_unproject(unproject_args);
    if (rectify->parsed()) return run_rectify(rectify_args);
    if (render->parsed()) return run_render(render_args);
    if (warp->parsed()) return run_warp(warp_args);
    if (optimize->parsed()) return run_optimize(optimize_args);
    if (gradcheck->parsed()) return run_gradcheck(gradcheck_args);
    if (eval->parsed()) return run_eval(eval_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
