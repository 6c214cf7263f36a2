#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <json.hpp>

#include "fisheyedist/io.hpp"
#include "helpers.hpp"

#ifndef FISHEYEDIST_CLI_PATH
#define FISHEYEDIST_CLI_PATH ""
#endif

using namespace fisheyedist;
using doctest::Approx;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fisheyedist_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliResult {
  int exit_code;
  std::string stdout_text;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
  const fs::path out_file = scratch / "stdout.txt";
  const std::string cmd = std::string(FISHEYEDIST_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2> " + (scratch / "stderr.txt").string();
  const int raw = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  return {WEXITSTATUS(raw), text};
}

}  // namespace

TEST_CASE("cli basics" * doctest::skip(std::string(FISHEYEDIST_CLI_PATH).empty())) {
  TempDir tmp;

  SUBCASE("unknown subcommand exits 1") {
    CHECK(run_cli("frobnicate", tmp.path).exit_code == 1);
    CHECK(run_cli("", tmp.path).exit_code == 1);
  }

  SUBCASE("project on the unit camera prints the principal pixel") {
    const fs::path kfile = tmp.path / "k.json";
    write_intrinsics(kfile, testutil::unit_intrinsics());
    const CliResult r =
        run_cli("project --intrinsics " + kfile.string() + " --point 0 0 1", tmp.path);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.stdout_text);
    CHECK(j["u"].get<double>() == Approx(0.0).scale(1));
    CHECK(j["v"].get<double>() == Approx(0.0).scale(1));
  }

  SUBCASE("unproject inverts project") {
    const fs::path kfile = tmp.path / "k.json";
    write_intrinsics(kfile, reference_intrinsics(64, 40));
    const CliResult r = run_cli("unproject --intrinsics " + kfile.string() +
                                    " --pixel 20 11 --distance 4",
                                tmp.path);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.stdout_text);
    const double norm = std::hypot(j["x"].get<double>(),
                                   std::hypot(j["y"].get<double>(), j["z"].get<double>()));
    CHECK(norm == Approx(4.0).epsilon(1e-9));
  }

  SUBCASE("eval of identical maps reports zero error, exit 0") {
    DistanceMap map(6, 4);
    for (int i = 0; i < map.size(); ++i) map[i] = 1.0 + 0.5 * i;
    const fs::path pfm = tmp.path / "d.pfm";
    write_pfm(pfm, map);
    const CliResult r =
        run_cli("eval " + pfm.string() + " " + pfm.string() + " --cap 40", tmp.path);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.stdout_text);
    CHECK(j["abs_rel"].get<double>() == Approx(0.0).scale(1));
    CHECK(j["delta1"].get<double>() == Approx(1.0));
  }

  SUBCASE("missing file exits 2") {
    CHECK(run_cli("eval /nonexistent/a.pfm /nonexistent/b.pfm", tmp.path).exit_code == 2);
  }
}

TEST_CASE("cli pipeline: render, warp, optimize, gradcheck, eval, rectify" *
          doctest::skip(std::string(FISHEYEDIST_CLI_PATH).empty())) {
  TempDir tmp;
  const fs::path scene_file = tmp.path / "scene.json";
  write_scene(scene_file, testutil::recovery_scene());
  const fs::path kfile = tmp.path / "k.json";
  write_intrinsics(kfile, reference_intrinsics(24, 16));
  const fs::path bundle = tmp.path / "bundle";

  const CliResult rendered = run_cli("render --scene " + scene_file.string() +
                                         " --intrinsics " + kfile.string() + " --out " +
                                         bundle.string() +
                                         " --frames 3 --motion \"0 0 0 0.04 0.02 0.5\" "
                                         "--speed 2",
                                     tmp.path);
    REQUIRE(rendered.exit_code == 0);
  REQUIRE(fs::exists(bundle / "frame_002.pgm"));

  SUBCASE("warp reconstructs the middle frame") {
    const CliResult r = run_cli("warp --bundle " + bundle.string() +
                                    " --target 1 --source 0 --out " +
                                    (tmp.path / "recon.pgm").string(),
                                tmp.path);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.stdout_text);
    CHECK(j["valid_fraction"].get<double>() > 0.5);
    CHECK(j["mean_abs_error"].get<double>() < 0.05);
  }

  SUBCASE("optimize writes a distance map, a trace and diagnostics") {
    const fs::path out = tmp.path / "recovered.pfm";
    const fs::path trace = tmp.path / "trace.json";
    const fs::path diag = tmp.path / "diag";
    const CliResult r = run_cli("optimize --bundle " + bundle.string() + " --out " +
                                    out.string() + " --trace " + trace.string() +
                                    " --diagnostics " + diag.string() +
                                    " --iterations 40 --step 700 --init 5",
                                tmp.path);
    REQUIRE(r.exit_code == 0);
    REQUIRE(fs::exists(out));
    const json summary = json::parse(r.stdout_text);
    CHECK(summary["final_loss"].get<double>() <= summary["initial_loss"].get<double>());
    CHECK(summary["final_report"]["scales"].size() >= 2);
    CHECK(fs::exists(diag / "pe_t1_s0.pgm"));
    CHECK(fs::exists(diag / "omega_t1_fwd.pgm"));
    CHECK(fs::exists(diag / "mask_t1_s2.pgm"));
    const json jtrace = json::parse(std::ifstream(trace));
    CHECK(jtrace["loss"].size() == 41);

    const CliResult ev = run_cli("eval " + out.string() + " " +
                                     (bundle / "frame_001_dist.pfm").string() + " --cap 80",
                                 tmp.path);
    REQUIRE(ev.exit_code == 0);
    CHECK(json::parse(ev.stdout_text)["n_pixels"].get<int>() > 300);
  }

  SUBCASE("gradcheck reports small errors away from the optimum") {
    const CliResult r = run_cli("gradcheck --bundle " + bundle.string() +
                                    " --samples 8 --scales 2 --seed 5 --constant-init --init 5",
                                tmp.path);
    REQUIRE(r.exit_code == 0);
    const json j = json::parse(r.stdout_text);
    CHECK(j["median_rel_error"].get<double>() < 1e-3);
    CHECK(j["max_rel_error"].get<double>() >= j["median_rel_error"].get<double>());
  }

  SUBCASE("rectify emits an undistorted image") {
    const CliResult r = run_cli("rectify --intrinsics " + kfile.string() + " --input " +
                                    (bundle / "frame_000.pgm").string() + " --output " +
                                    (tmp.path / "rect.pgm").string() +
                                    " --mode cylindrical --fov-deg 150",
                                tmp.path);
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.stdout_text)["valid_fraction"].get<double>() > 0.5);
    CHECK(fs::exists(tmp.path / "rect.pgm"));
  }
}
