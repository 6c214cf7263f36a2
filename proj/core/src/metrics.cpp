#include "fisheyedist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fisheyedist {

namespace {

// Lower-middle element for even counts, so scaling is deterministic.
double median_of(std::vector<double> values) {
  const std::size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  return values[mid];
}

}  // namespace

MetricsReport evaluate(const DistanceMap& pred, const DistanceMap& gt, double cap,
                       bool median_scale) {
  if (!pred.same_size(gt)) throw std::invalid_argument("evaluate: prediction/gt size mismatch");
  pred.validate();

  // Ground truth may carry non-positive entries for unmeasured pixels; the
  // valid set skips them.
  std::vector<double> p_valid, g_valid;
  for (int i = 0; i < gt.size(); ++i) {
    if (std::isfinite(gt[i]) && gt[i] > 0.0 && gt[i] <= cap) {
      p_valid.push_back(pred[i]);
      g_valid.push_back(gt[i]);
    }
  }
  if (p_valid.empty()) throw std::runtime_error("evaluate: no ground-truth pixels within cap");

  if (median_scale) {
    const double scale = median_of(g_valid) / median_of(p_valid);
    for (double& p : p_valid) p *= scale;
  }

  MetricsReport r;
  r.n_pixels = static_cast<int>(p_valid.size());
  r.cap = cap;
  r.median_scaled = median_scale;
  const double n = static_cast<double>(r.n_pixels);
  for (std::size_t i = 0; i < p_valid.size(); ++i) {
    const double p = p_valid[i], g = g_valid[i];
    const double diff = p - g;
    r.abs_rel += std::abs(diff) / g;
    r.sq_rel += diff * diff / g;
    r.rmse += diff * diff;
    const double dlog = std::log(p) - std::log(g);
    r.rmse_log += dlog * dlog;
    const double ratio = std::max(p / g, g / p);
    if (ratio < 1.25) r.delta1 += 1.0;
    if (ratio < 1.25 * 1.25) r.delta2 += 1.0;
    if (ratio < 1.25 * 1.25 * 1.25) r.delta3 += 1.0;
  }
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(r.rmse / n);
  r.rmse_log = std::sqrt(r.rmse_log / n);
  r.delta1 /= n;
  r.delta2 /= n;
  r.delta3 /= n;
  return r;
}

std::array<double, 3> cap_presets() { return {30.0, 40.0, 80.0}; }

}  // namespace fisheyedist
