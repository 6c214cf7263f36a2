#pragma once

#include <array>

#include "fisheyedist/image.hpp"

namespace fisheyedist {

struct MetricsReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0, delta2 = 0.0, delta3 = 0.0;  // fractions with ratio < 1.25^k
  int n_pixels = 0;
  double cap = 0.0;
  bool median_scaled = false;
};

/// Error metrics over the valid set {p : 0 < gt(p) <= cap}. With
/// median_scale, predictions are rescaled by median(gt)/median(pred) first.
/// Throws when the valid set is empty.
MetricsReport evaluate(const DistanceMap& pred, const DistanceMap& gt, double cap,
                       bool median_scale);

/// Distance caps used for batch evaluation, meters.
std::array<double, 3> cap_presets();

}  // namespace fisheyedist
