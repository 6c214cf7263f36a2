#include <doctest.h>

#include <cmath>
#include <random>

#include "fisheyedist/metrics.hpp"

using namespace fisheyedist;
using doctest::Approx;

namespace {

DistanceMap map_of(std::initializer_list<double> values, int w, int h) {
  DistanceMap m(w, h);
  int i = 0;
  for (double v : values) m[i++] = v;
  return m;
}

}  // namespace

TEST_CASE("perfect prediction scores zero error and full deltas") {
  DistanceMap gt(4, 3);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> dist(0.5, 30.0);
  for (int i = 0; i < gt.size(); ++i) gt[i] = dist(rng);
  const MetricsReport r = evaluate(gt, gt, 80.0, false);
  CHECK(r.abs_rel == Approx(0.0).scale(1));
  CHECK(r.sq_rel == Approx(0.0).scale(1));
  CHECK(r.rmse == Approx(0.0).scale(1));
  CHECK(r.rmse_log == Approx(0.0).scale(1));
  CHECK(r.delta1 == Approx(1.0));
  CHECK(r.delta2 == Approx(1.0));
  CHECK(r.delta3 == Approx(1.0));
  CHECK(r.n_pixels == 12);
}

TEST_CASE("uniform 1.25x overestimate sits exactly on the delta boundary") {
  const DistanceMap gt = map_of({2.0, 4.0, 8.0, 16.0}, 2, 2);
  DistanceMap pred(2, 2);
  for (int i = 0; i < 4; ++i) pred[i] = 1.25 * gt[i];
  const MetricsReport r = evaluate(pred, gt, 80.0, false);
  CHECK(r.abs_rel == Approx(0.25).epsilon(1e-12));
  CHECK(r.delta1 == Approx(0.0).scale(1));  // strict inequality
  CHECK(r.delta2 == Approx(1.0));
  CHECK(r.delta3 == Approx(1.0));
}

TEST_CASE("hand-computed two-pixel fixture") {
  const DistanceMap gt = map_of({2.0, 4.0}, 2, 1);
  const DistanceMap pred = map_of({1.0, 8.0}, 2, 1);
  const MetricsReport r = evaluate(pred, gt, 80.0, false);
  CHECK(r.abs_rel == Approx(0.75).epsilon(1e-12));
  CHECK(r.sq_rel == Approx(2.25).epsilon(1e-12));
  CHECK(r.rmse == Approx(std::sqrt(8.5)).epsilon(1e-12));
  CHECK(r.rmse_log == Approx(std::abs(std::log(2.0))).epsilon(1e-12));
  CHECK(r.n_pixels == 2);
}

TEST_CASE("median scaling")
{
  DistanceMap gt(5, 3), pred(5, 3);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(1.0, 40.0);
  for (int i = 0; i < gt.size(); ++i) {
    gt[i] = dist(rng);
    pred[i] = dist(rng);
  }
  SUBCASE("invariant to uniform prediction rescaling") {
    const MetricsReport base = evaluate(pred, gt, 80.0, true);
    for (const double c : {0.37, 3.7, 21.0}) {
      DistanceMap scaled(5, 3);
      for (int i = 0; i < pred.size(); ++i) scaled[i] = c * pred[i];
      const MetricsReport r = evaluate(scaled, gt, 80.0, true);
      CHECK(r.abs_rel == Approx(base.abs_rel).epsilon(1e-12));
      CHECK(r.rmse == Approx(base.rmse).epsilon(1e-12));
      CHECK(r.rmse_log == Approx(base.rmse_log).epsilon(1e-12));
      CHECK(r.delta1 == Approx(base.delta1).scale(1));
    }
  }
  SUBCASE("without scaling, a uniform factor shows up directly") {
    DistanceMap scaled(5, 3);
    for (int i = 0; i < gt.size(); ++i) scaled[i] = 1.3 * gt[i];
    CHECK(evaluate(scaled, gt, 80.0, false).abs_rel == Approx(0.3).epsilon(1e-12));
  }
}

TEST_CASE("distance caps select the valid set") {
  DistanceMap gt(4, 1), pred(4, 1, 2.0);
  gt[0] = 10.0;
  gt[1] = 35.0;
  gt[2] = 60.0;
  gt[3] = 90.0;
  CHECK(evaluate(pred, gt, 80.0, false).n_pixels == 3);
  CHECK(evaluate(pred, gt, 40.0, false).n_pixels == 2);
  CHECK(evaluate(pred, gt, 30.0, false).n_pixels == 1);
  CHECK_THROWS_AS(evaluate(pred, gt, 5.0, false), std::runtime_error);

  const auto caps = cap_presets();
  CHECK(caps[0] == Approx(30.0));
  CHECK(caps[1] == Approx(40.0));
  CHECK(caps[2] == Approx(80.0));
}

TEST_CASE("mismatched sizes are rejected") {
  CHECK_THROWS_AS(evaluate(DistanceMap(2, 2, 1.0), DistanceMap(3, 2, 1.0), 80.0, false),
                  std::invalid_argument);
}

TEST_CASE("unmeasured ground-truth pixels are skipped") {
  DistanceMap gt(3, 1, 4.0), pred(3, 1, 4.0);
  gt[1] = 0.0;  // no measurement
  const MetricsReport r = evaluate(pred, gt, 80.0, false);
  CHECK(r.n_pixels == 2);
  CHECK(r.abs_rel == Approx(0.0).scale(1));
}
