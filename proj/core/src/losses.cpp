#include "fisheyedist/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fisheyedist/warp.hpp"

namespace fisheyedist {

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct ChannelStats {
  double n = 0.0;
  double mu_a = 0.0, mu_b = 0.0;
  double var_a = 0.0, var_b = 0.0;
  double cov = 0.0;
};

ChannelStats window_stats(const Image& a, const Image& b, const Mask& valid, int x, int y,
                          int c) {
  double n = 0.0, sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    const int qy = y + dy;
    if (qy < 0 || qy >= a.height()) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      const int qx = x + dx;
      if (qx < 0 || qx >= a.width()) continue;
      if (!valid.at(qx, qy)) continue;
      const double va = a.at(qx, qy, c);
      const double vb = b.at(qx, qy, c);
      n += 1.0;
      sa += va;
      sb += vb;
      saa += va * va;
      sbb += vb * vb;
      sab += va * vb;
    }
  }
  ChannelStats s;
  s.n = n;
  if (n > 0.0) {
    s.mu_a = sa / n;
    s.mu_b = sb / n;
    s.var_a = std::max(saa / n - s.mu_a * s.mu_a, 0.0);
    s.var_b = std::max(sbb / n - s.mu_b * s.mu_b, 0.0);
    s.cov = sab / n - s.mu_a * s.mu_b;
  }
  return s;
}

double ssim_from_stats(const ChannelStats& s) {
  const double n1 = 2.0 * s.mu_a * s.mu_b + kC1;
  const double n2 = 2.0 * s.cov + kC2;
  const double d1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kC1;
  const double d2 = s.var_a + s.var_b + kC2;
  return (n1 * n2) / (d1 * d2);
}

Mask ones_mask(int width, int height) { return Mask(width, height, true); }

// Static-pixel filter reusing already-computed pe maps: the warped side is
// the (masked) reconstruction error, the comparison side the cached
// unwarped-source error.
Mask omega_from_pe(const std::vector<Grid>& warp_pe, const std::vector<const Grid*>& static_pe,
                   int width, int height) {
  Mask omega(width, height);
  for (int i = 0; i < width * height; ++i) {
    double warp_min = warp_pe[0][i], static_min = (*static_pe[0])[i];
    for (std::size_t s = 1; s < warp_pe.size(); ++s) {
      warp_min = std::min(warp_min, warp_pe[s][i]);
      static_min = std::min(static_min, (*static_pe[s])[i]);
    }
    omega[i] = warp_min < static_min ? 1 : 0;
  }
  return omega;
}

Mask mask_from_warp(const std::vector<WarpedPoint>& warped, int width, int height) {
  Mask m(width, height);
  for (int i = 0; i < width * height; ++i) m[i] = warped[i].valid ? 1 : 0;
  return m;
}

Image reconstruct(const Image& src, const std::vector<WarpedPoint>& warped, int width,
                  int height) {
  Image out(width, height, src.channels());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const WarpedPoint& wp = warped[y * width + x];
      if (!wp.valid) continue;
      const BilinearTaps t = bilinear_taps(wp.u, wp.v, src.width(), src.height());
      for (int c = 0; c < src.channels(); ++c)
        out.at(x, y, c) = t.w00 * src.at(t.x0, t.y0, c) + t.w10 * src.at(t.x0 + 1, t.y0, c) +
                          t.w01 * src.at(t.x0, t.y0 + 1, c) +
                          t.w11 * src.at(t.x0 + 1, t.y0 + 1, c);
    }
  }
  return out;
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Accumulates weight * d(mean_{supervised} min(pe, th)) / dD into gradD for
// the pe term of one source. The clip threshold and all discrete selections
// are treated as constants.
void photometric_grad(const Image& target, const Image& source, const Image& recon,
                      const Mask& valid, const std::vector<WarpedPoint>& warped,
                      const MinReprojection& mr, int slot, double alpha, double weight,
                      Grid& gradD) {
  const int w = target.width(), h = target.height(), C = target.channels();
  const int n_sup = mr.supervised.count();
  if (n_sup == 0) return;
  const double pixel_adj = weight / n_sup;

  // Adjoint on the reconstructed image.
  Image recon_adj(w, h, C, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      if (!mr.supervised.at(x, y) || mr.clipped.at(x, y) || mr.source_index[i] != slot) continue;
      // L1 part, diagonal in the pixel.
      for (int c = 0; c < C; ++c)
        recon_adj.at(x, y, c) +=
            pixel_adj * (1.0 - alpha) * sgn(recon.at(x, y, c) - target.at(x, y, c)) / C;
      // SSIM part scatters over the 3x3 window.
      const double ssim_adj = pixel_adj * (-alpha / 2.0) / C;
      for (int c = 0; c < C; ++c) {
        const ChannelStats s = window_stats(target, recon, valid, x, y, c);
        if (s.n == 0.0) continue;
        const double n1 = 2.0 * s.mu_a * s.mu_b + kC1;
        const double n2 = 2.0 * s.cov + kC2;
        const double d1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kC1;
        const double d2 = s.var_a + s.var_b + kC2;
        const double A = n1 / d1;
        const double B = n2 / d2;
        const double dA_dmub = (2.0 * s.mu_a * d1 - n1 * 2.0 * s.mu_b) / (d1 * d1);
        const double dB_dvarb = -n2 / (d2 * d2);
        const double dB_dcov = 2.0 / d2;
        for (int dy = -1; dy <= 1; ++dy) {
          const int qy = y + dy;
          if (qy < 0 || qy >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int qx = x + dx;
            if (qx < 0 || qx >= w) continue;
            if (!valid.at(qx, qy)) continue;
            const double db = recon.at(qx, qy, c) - s.mu_b;
            const double da = target.at(qx, qy, c) - s.mu_a;
            const double dssim =
                (B * dA_dmub + A * (dB_dvarb * 2.0 * db + dB_dcov * da)) / s.n;
            recon_adj.at(qx, qy, c) += ssim_adj * dssim;
          }
        }
      }
    }
  }

  // Chain through the bilinear sampler and the warp Jacobian; the
  // reconstruction at a pixel depends only on that pixel's distance.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const WarpedPoint& wp = warped[i];
      if (!wp.valid) continue;
      const BilinearTaps t = bilinear_taps(wp.u, wp.v, source.width(), source.height());
      double sum = 0.0;
      for (int c = 0; c < C; ++c) {
        const double adj = recon_adj.at(x, y, c);
        if (adj == 0.0) continue;
        const double gu =
            (1.0 - t.fy) * (source.at(t.x0 + 1, t.y0, c) - source.at(t.x0, t.y0, c)) +
            t.fy * (source.at(t.x0 + 1, t.y0 + 1, c) - source.at(t.x0, t.y0 + 1, c));
        const double gv =
            (1.0 - t.fx) * (source.at(t.x0, t.y0 + 1, c) - source.at(t.x0, t.y0, c)) +
            t.fx * (source.at(t.x0 + 1, t.y0 + 1, c) - source.at(t.x0 + 1, t.y0, c));
        sum += adj * (gu * wp.du_dd + gv * wp.dv_dd);
      }
      gradD[i] += sum;
    }
  }
}

// Edge-aware smoothness with optional gradient accumulation (raw loss, the
// caller applies beta and the scale decay through grad_weight).
double smoothness_term(const Grid& D, const Image& I, double grad_weight, Grid* gradD) {
  const int w = D.width(), h = D.height(), C = I.channels();
  const int N = w * h;
  Grid inv(w, h);
  double mean_inv = 0.0;
  for (int i = 0; i < N; ++i) {
    inv[i] = 1.0 / D[i];
    mean_inv += inv[i];
  }
  mean_inv /= N;
  Grid ds(w, h);
  for (int i = 0; i < N; ++i) ds[i] = inv[i] / mean_inv;

  auto image_weight = [&](int x0, int y0, int x1, int y1) {
    double g = 0.0;
    for (int c = 0; c < C; ++c) g += std::abs(I.at(x1, y1, c) - I.at(x0, y0, c));
    return std::exp(-g / C);
  };

  Grid gstar(w, h);
  double loss_u = 0.0, loss_v = 0.0;
  const double nu = static_cast<double>((w - 1) * h);
  const double nv = static_cast<double>(w * (h - 1));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      const double diff = ds.at(x + 1, y) - ds.at(x, y);
      const double ew = image_weight(x, y, x + 1, y);
      loss_u += std::abs(diff) * ew;
      if (gradD != nullptr) {
        const double a = sgn(diff) * ew / nu;
        gstar.at(x + 1, y) += a;
        gstar.at(x, y) -= a;
      }
    }
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double diff = ds.at(x, y + 1) - ds.at(x, y);
      const double ew = image_weight(x, y, x, y + 1);
      loss_v += std::abs(diff) * ew;
      if (gradD != nullptr) {
        const double a = sgn(diff) * ew / nv;
        gstar.at(x, y + 1) += a;
        gstar.at(x, y) -= a;
      }
    }
  }
  const double loss = (nu > 0.0 ? loss_u / nu : 0.0) + (nv > 0.0 ? loss_v / nv : 0.0);

  if (gradD != nullptr) {
    // ds = (1/D) / mean(1/D): the mean couples every pixel.
    double coupled = 0.0;
    for (int i = 0; i < N; ++i) coupled += gstar[i] * inv[i];
    for (int i = 0; i < N; ++i) {
      const double dd = (-gstar[i] / mean_inv + coupled / (mean_inv * mean_inv * N)) / (D[i] * D[i]);
      (*gradD)[i] += grad_weight * dd;
    }
  }
  return loss;
}

struct CsdcPass {
  double sum = 0.0;
  long count = 0;
  std::vector<int> from, to;
  std::vector<std::vector<WarpedPoint>> warped;
};

CsdcPass csdc_forward(const PointCloud& rays, const FisheyeIntrinsics& K,
                      const std::vector<const Grid*>& D, const SnippetPoses& poses,
                      bool keep_warps) {
  const int n = static_cast<int>(D.size());
  CsdcPass pass;
  for (int t = 0; t < n - 1; ++t) {
    for (int u = t + 1; u < n; ++u) {
      for (const auto& [from, to] : {std::pair{t, u}, std::pair{u, t}}) {
        std::vector<WarpedPoint> warped = warp_points(rays, *D[from], poses.between(from, to), K);
        for (int i = 0; i < rays.width * rays.height; ++i) {
          const WarpedPoint& wp = warped[i];
          if (!wp.valid) continue;
          const double read = bilinear_grid(*D[to], bilinear_taps(wp.u, wp.v, K.width, K.height));
          pass.sum += std::abs(wp.dist - read);
          pass.count += 1;
        }
        if (keep_warps) {
          pass.from.push_back(from);
          pass.to.push_back(to);
          pass.warped.push_back(std::move(warped));
        }
      }
    }
  }
  return pass;
}

void csdc_grad(const CsdcPass& pass, const PointCloud& rays, const FisheyeIntrinsics& K,
               const std::vector<const Grid*>& D, double weight,
               const std::vector<Grid*>& gradD) {
  if (pass.count == 0) return;
  const double adj = weight / static_cast<double>(pass.count);
  for (std::size_t d = 0; d < pass.warped.size(); ++d) {
    const Grid& D_to = *D[pass.to[d]];
    Grid& g_from = *gradD[pass.from[d]];
    Grid& g_to = *gradD[pass.to[d]];
    const auto& warped = pass.warped[d];
    for (int i = 0; i < rays.width * rays.height; ++i) {
      const WarpedPoint& wp = warped[i];
      if (!wp.valid) continue;
      const BilinearTaps t = bilinear_taps(wp.u, wp.v, K.width, K.height);
      const double read = bilinear_grid(D_to, t);
      const double s = sgn(wp.dist - read);
      if (s == 0.0) continue;
      const double gu = (1.0 - t.fy) * (D_to.at(t.x0 + 1, t.y0) - D_to.at(t.x0, t.y0)) +
                        t.fy * (D_to.at(t.x0 + 1, t.y0 + 1) - D_to.at(t.x0, t.y0 + 1));
      const double gv = (1.0 - t.fx) * (D_to.at(t.x0, t.y0 + 1) - D_to.at(t.x0, t.y0)) +
                        t.fx * (D_to.at(t.x0 + 1, t.y0 + 1) - D_to.at(t.x0 + 1, t.y0));
      // d|dist - read|/dD_from through both the transformed distance and the
      // moving read position; the tap values feed D_to.
      g_from[i] += adj * s * (wp.ddist_dd - (gu * wp.du_dd + gv * wp.dv_dd));
      const double tap_adj = -adj * s;
      g_to.at(t.x0, t.y0) += tap_adj * t.w00;
      g_to.at(t.x0 + 1, t.y0) += tap_adj * t.w10;
      g_to.at(t.x0, t.y0 + 1) += tap_adj * t.w01;
      g_to.at(t.x0 + 1, t.y0 + 1) += tap_adj * t.w11;
    }
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("LossWeights: alpha must be in [0,1]");
  if (beta < 0.0 || gamma < 0.0)
    throw std::invalid_argument("LossWeights: weights must be nonnegative");
  if (!(clip_percentile > 0.0 && clip_percentile <= 100.0))
    throw std::invalid_argument("LossWeights: clip_percentile must be in (0,100]");
  if (n_scales < 2 || n_scales > 4)
    throw std::invalid_argument("LossWeights: n_scales must be in [2,4]");
  if (automask_warmup < 0)
    throw std::invalid_argument("LossWeights: automask_warmup must be nonnegative");
}

Grid ssim(const Image& a, const Image& b, const Mask& valid) {
  if (!a.same_size(b) || a.width() != valid.width() || a.height() != valid.height())
    throw std::invalid_argument("ssim: dimension mismatch");
  Grid out(a.width(), a.height());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!valid.at(x, y)) continue;
      double acc = 0.0;
      for (int c = 0; c < a.channels(); ++c)
        acc += ssim_from_stats(window_stats(a, b, valid, x, y, c));
      out.at(x, y) = acc / a.channels();
    }
  }
  return out;
}

Grid photometric_error(const Image& target, const Image& recon, const Mask& valid,
                       double alpha) {
  if (!target.same_size(recon) || target.width() != valid.width() ||
      target.height() != valid.height())
    throw std::invalid_argument("photometric_error: dimension mismatch");
  const Grid s = ssim(target, recon, valid);
  Grid pe(target.width(), target.height());
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < target.width(); ++x) {
      if (!valid.at(x, y)) continue;
      double l1 = 0.0;
      for (int c = 0; c < target.channels(); ++c)
        l1 += std::abs(target.at(x, y, c) - recon.at(x, y, c));
      l1 /= target.channels();
      pe.at(x, y) = alpha * (1.0 - s.at(x, y)) / 2.0 + (1.0 - alpha) * l1;
    }
  }
  return pe;
}

MinReprojection min_reprojection(const std::vector<Grid>& pe, const std::vector<Mask>& valid,
                                 const Mask& omega, double clip_percentile) {
  if (pe.empty()) throw std::invalid_argument("min_reprojection: need at least one source");
  if (pe.size() != valid.size())
    throw std::invalid_argument("min_reprojection: pe/valid count mismatch");
  if (!(clip_percentile > 0.0 && clip_percentile <= 100.0))
    throw std::invalid_argument("min_reprojection: clip percentile must be in (0,100]");
  const int w = pe[0].width(), h = pe[0].height();
  for (std::size_t s = 0; s < pe.size(); ++s)
    if (!pe[s].same_size(pe[0]) || valid[s].width() != w || valid[s].height() != h)
      throw std::invalid_argument("min_reprojection: dimension mismatch");
  if (omega.width() != w || omega.height() != h)
    throw std::invalid_argument("min_reprojection: omega dimension mismatch");

  MinReprojection r;
  r.per_pixel = Grid(w, h);
  r.source_index.assign(static_cast<std::size_t>(w) * h, -1);
  r.supervised = Mask(w, h);
  r.clipped = Mask(w, h);

  std::vector<double> survivors;
  for (int i = 0; i < w * h; ++i) {
    if (!omega[i]) continue;
    int best = -1;
    double best_pe = 0.0;
    for (std::size_t s = 0; s < pe.size(); ++s) {
      if (!valid[s][i]) continue;
      if (best < 0 || pe[s][i] < best_pe) {
        best = static_cast<int>(s);
        best_pe = pe[s][i];
      }
    }
    if (best < 0) continue;
    r.source_index[i] = best;
    r.supervised[i] = 1;
    r.per_pixel[i] = best_pe;
    survivors.push_back(best_pe);
  }
  if (survivors.empty()) throw std::runtime_error("min_reprojection: no supervised pixels");

  // Nearest-rank percentile of the surviving per-pixel minima.
  std::sort(survivors.begin(), survivors.end());
  const auto rank = static_cast<std::size_t>(
      std::ceil(clip_percentile / 100.0 * static_cast<double>(survivors.size())));
  r.clip_threshold = survivors[std::min(std::max<std::size_t>(rank, 1), survivors.size()) - 1];

  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < w * h; ++i) {
    if (!r.supervised[i]) continue;
    if (r.per_pixel[i] >= r.clip_threshold) {
      r.clipped[i] = 1;
      r.per_pixel[i] = r.clip_threshold;
    }
    sum += r.per_pixel[i];
    ++n;
  }
  r.loss = sum / n;
  return r;
}

Mask automask(const Image& target, const std::vector<Image>& sources,
              const std::vector<Image>& recons, double alpha) {
  if (sources.empty() || sources.size() != recons.size())
    throw std::invalid_argument("automask: sources/recons count mismatch");
  const Mask ones = ones_mask(target.width(), target.height());
  std::vector<Grid> pe_warp, pe_static;
  pe_warp.reserve(recons.size());
  pe_static.reserve(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    pe_warp.push_back(photometric_error(target, recons[s], ones, alpha));
    pe_static.push_back(photometric_error(target, sources[s], ones, alpha));
  }
  Mask omega(target.width(), target.height());
  for (int i = 0; i < omega.size(); ++i) {
    double warp_min = pe_warp[0][i], static_min = pe_static[0][i];
    for (std::size_t s = 1; s < sources.size(); ++s) {
      warp_min = std::min(warp_min, pe_warp[s][i]);
      static_min = std::min(static_min, pe_static[s][i]);
    }
    omega[i] = warp_min < static_min ? 1 : 0;
  }
  return omega;
}

double smoothness_loss(const DistanceMap& D, const Image& I) {
  if (D.width() != I.width() || D.height() != I.height())
    throw std::invalid_argument("smoothness_loss: dimension mismatch");
  D.validate();
  return smoothness_term(D, I, 0.0, nullptr);
}

SnippetPoses::SnippetPoses(std::vector<Pose> adjacent_forward)
    : adjacent_(std::move(adjacent_forward)) {
  if (adjacent_.empty()) throw std::invalid_argument("SnippetPoses: need at least one transform");
}

SnippetPoses SnippetPoses::from_ground_truth(const SequenceSnippet& snippet) {
  std::vector<Pose> adj;
  for (int i = 0; i + 1 < snippet.count(); ++i) adj.push_back(snippet.relative_pose(i, i + 1));
  return SnippetPoses(std::move(adj));
}

SnippetPoses SnippetPoses::odometry_scaled(const SequenceSnippet& snippet) {
  std::vector<Pose> adj;
  for (int i = 0; i + 1 < snippet.count(); ++i)
    adj.push_back(scale_pose(snippet.relative_pose(i, i + 1), snippet.adjacent_displacement(i)));
  return SnippetPoses(std::move(adj));
}

Pose SnippetPoses::between(int from, int to) const {
  if (from < 0 || to < 0 || from >= frame_count() || to >= frame_count())
    throw std::out_of_range("SnippetPoses: frame index out of range");
  if (from == to) return Pose::identity();
  if (from < to) {
    Pose T = adjacent_[from];
    for (int i = from + 1; i < to; ++i) T = compose(adjacent_[i], T);
    return T;
  }
  return invert(between(to, from));
}

double csdc_loss(const std::vector<DistanceMap>& D_maps, const SnippetPoses& poses,
                 const FisheyeIntrinsics& K) {
  if (D_maps.size() < 2) throw std::invalid_argument("csdc_loss: need at least two frames");
  if (poses.frame_count() != static_cast<int>(D_maps.size()))
    throw std::invalid_argument("csdc_loss: missing pose for a frame pair");
  std::vector<const Grid*> D;
  for (const DistanceMap& m : D_maps) {
    if (m.width() != K.width || m.height() != K.height)
      throw std::invalid_argument("csdc_loss: map size does not match intrinsics");
    m.validate();
    D.push_back(&m);
  }
  const ThetaLUT lut = build_theta_lut(K);
  const PointCloud rays = unproject_rays(K, lut);
  const CsdcPass pass = csdc_forward(rays, K, D, poses, false);
  return pass.count > 0 ? pass.sum / static_cast<double>(pass.count) : 0.0;
}

double LossReport::recompute_total() const {
  double t = 0.0;
  for (std::size_t lvl = 0; lvl < scales.size(); ++lvl) {
    const ScaleLosses& s = scales[lvl];
    const double decay = 1.0 / static_cast<double>(1 << lvl);
    const double smooth_decay = weights.smoothness_no_decay ? 1.0 : decay;
    t += decay * (s.photometric_forward + s.photometric_backward +
                  weights.gamma * s.distance_consistency) +
         smooth_decay * weights.beta * s.smoothness;
  }
  return t;
}

LossContext::LossContext(const SequenceSnippet& snippet, int n_scales, double alpha)
    : frame_count_(snippet.count()), alpha_(alpha) {
  if (frame_count_ < 2) throw std::invalid_argument("LossContext: need at least two frames");
  if (n_scales < 1) throw std::invalid_argument("LossContext: need at least one scale");
  const int N = frame_count_;
  FisheyeIntrinsics K = snippet.intrinsics;
  std::vector<Image> images;
  for (const SnippetFrame& f : snippet.frames) {
    if (f.image.width() != K.width || f.image.height() != K.height)
      throw std::invalid_argument("LossContext: frame image does not match intrinsics size");
    images.push_back(f.image);
  }
  for (int lvl = 0; lvl < n_scales; ++lvl) {
    if (lvl > 0) {
      if (K.width < 4 || K.height < 4)
        throw std::invalid_argument("LossContext: image too small for the requested scales");
      K = K.half_resolution();
      for (Image& im : images) im = downsample_half(im);
    }
    ThetaLUT lut = build_theta_lut(K);
    PointCloud rays = unproject_rays(K, lut);
    // pe between a target frame and the unwarped source, the automask's
    // comparison side; independent of the distances.
    std::vector<Grid> static_pe(static_cast<std::size_t>(N) * N);
    const Mask ones = ones_mask(K.width, K.height);
    for (int t = 1; t + 1 < N; ++t) {
      for (int s : {t - 1, t + 1}) {
        static_pe[t * N + s] = photometric_error(images[t], images[s], ones, alpha);
        static_pe[s * N + t] = photometric_error(images[s], images[t], ones, alpha);
      }
    }
    levels_.push_back(Level{K, std::move(lut), std::move(rays), images, std::move(static_pe)});
  }
}

LossReport evaluate_loss(const LossContext& ctx, const std::vector<DistanceMap>& D_maps,
                         const SnippetPoses& poses, const LossWeights& weights,
                         std::vector<Grid>* gradient_out) {
  weights.validate();
  const int N = ctx.frame_count();
  if (N < 3)
    throw std::invalid_argument("evaluate_loss: need at least three frames for the objective");
  if (static_cast<int>(D_maps.size()) != N)
    throw std::invalid_argument("evaluate_loss: one distance map per frame required");
  if (poses.frame_count() != N) throw std::invalid_argument("evaluate_loss: missing pose");
  if (weights.n_scales > ctx.level_count())
    throw std::invalid_argument("evaluate_loss: context holds fewer scales than requested");
  if (weights.alpha != ctx.alpha())
    throw std::invalid_argument("evaluate_loss: context was built for a different alpha");

  const int n_scales = weights.n_scales;
  const int w0 = ctx.level(0).intrinsics.width;
  const int h0 = ctx.level(0).intrinsics.height;

  // Distance pyramids, level 0 = full resolution.
  std::vector<std::vector<Grid>> pyr(N);
  for (int f = 0; f < N; ++f) {
    if (D_maps[f].width() != w0 || D_maps[f].height() != h0)
      throw std::invalid_argument("evaluate_loss: distance map size mismatch");
    D_maps[f].validate();
    pyr[f].push_back(D_maps[f]);
    for (int lvl = 1; lvl < n_scales; ++lvl) pyr[f].push_back(downsample_half(pyr[f][lvl - 1]));
  }

  std::vector<std::vector<Grid>> grad(N);
  if (gradient_out != nullptr)
    for (int f = 0; f < N; ++f)
      for (int lvl = 0; lvl < n_scales; ++lvl)
        grad[f].emplace_back(pyr[f][lvl].width(), pyr[f][lvl].height());

  LossReport report;
  report.weights = weights;
  report.scales.resize(n_scales);
  report.selections.resize(n_scales);

  const int fwd_targets = N - 2;
  const int bwd_targets = 2 * (N - 2);

  // The automask may filter out every pixel at a scale (e.g. a static or
  // texture-free level); that target then contributes no photometric term
  // rather than aborting the evaluation.
  const auto supervised_count = [](const std::vector<Mask>& masks, const Mask& omega) {
    int n = 0;
    for (int i = 0; i < omega.size(); ++i) {
      if (!omega[i]) continue;
      for (const Mask& m : masks)
        if (m[i]) {
          ++n;
          break;
        }
    }
    return n;
  };

  for (int lvl = 0; lvl < n_scales; ++lvl) {
    const LossContext::Level& L = ctx.level(lvl);
    const double decay = 1.0 / static_cast<double>(1 << lvl);
    ScaleLosses& sl = report.scales[lvl];

    // Forward sequence: interior targets reconstructed from both neighbors.
    for (int t = 1; t + 1 < N; ++t) {
      const Image& target_img = L.images[t];
      std::vector<int> sources{t - 1, t + 1};
      std::vector<std::vector<WarpedPoint>> warps;
      std::vector<Mask> masks;
      std::vector<Image> recons;
      std::vector<Grid> pes;
      for (int s : sources) {
        warps.push_back(warp_points(L.rays, pyr[t][lvl], poses.between(t, s), L.intrinsics));
        masks.push_back(mask_from_warp(warps.back(), L.intrinsics.width, L.intrinsics.height));
        recons.push_back(reconstruct(L.images[s], warps.back(), L.intrinsics.width,
                                     L.intrinsics.height));
        pes.push_back(photometric_error(target_img, recons.back(), masks.back(), weights.alpha));
      }
      Mask omega = weights.automask_enabled
                       ? omega_from_pe(pes,
                                       {&L.static_pe[t * N + sources[0]],
                                        &L.static_pe[t * N + sources[1]]},
                                       L.intrinsics.width, L.intrinsics.height)
                       : ones_mask(L.intrinsics.width, L.intrinsics.height);
      if (lvl == 0)
        for (std::size_t s = 0; s < sources.size(); ++s)
          report.pairs.push_back(PairDiagnostics{t, sources[s], pes[s], masks[s]});
      if (supervised_count(masks, omega) == 0) {
        report.selections[lvl].push_back(TargetSelection{
            t, false, omega, std::vector<int>(static_cast<std::size_t>(omega.size()), -1), 0.0,
            Mask(L.intrinsics.width, L.intrinsics.height)});
        continue;
      }
      const MinReprojection mr =
          min_reprojection(pes, masks, omega, weights.clip_percentile);
      sl.photometric_forward += mr.loss / fwd_targets;
      report.selections[lvl].push_back(
          TargetSelection{t, false, omega, mr.source_index, mr.clip_threshold, mr.clipped});
      if (gradient_out != nullptr)
        for (std::size_t s = 0; s < sources.size(); ++s)
          photometric_grad(target_img, L.images[sources[s]], recons[s], masks[s], warps[s], mr,
                           static_cast<int>(s), weights.alpha, decay / fwd_targets,
                           grad[t][lvl]);
    }

    // Backward sequence: neighbors become targets, the interior frame the
    // sole source; each warp runs through the neighbor's own distances.
    for (int t = 1; t + 1 < N; ++t) {
      for (int tau : {t - 1, t + 1}) {
        const Image& target_img = L.images[tau];
        std::vector<std::vector<WarpedPoint>> warps;
        warps.push_back(warp_points(L.rays, pyr[tau][lvl], poses.between(tau, t), L.intrinsics));
        std::vector<Mask> masks{mask_from_warp(warps[0], L.intrinsics.width, L.intrinsics.height)};
        std::vector<Image> recons{
            reconstruct(L.images[t], warps[0], L.intrinsics.width, L.intrinsics.height)};
        std::vector<Grid> pes{
            photometric_error(target_img, recons[0], masks[0], weights.alpha)};
        Mask omega = weights.automask_enabled
                         ? omega_from_pe(pes, {&L.static_pe[tau * N + t]}, L.intrinsics.width,
                                         L.intrinsics.height)
                         : ones_mask(L.intrinsics.width, L.intrinsics.height);
        if (lvl == 0) report.pairs.push_back(PairDiagnostics{tau, t, pes[0], masks[0]});
        if (supervised_count(masks, omega) == 0) {
          report.selections[lvl].push_back(TargetSelection{
              tau, true, omega, std::vector<int>(static_cast<std::size_t>(omega.size()), -1),
              0.0, Mask(L.intrinsics.width, L.intrinsics.height)});
          continue;
        }
        const MinReprojection mr =
            min_reprojection(pes, masks, omega, weights.clip_percentile);
        sl.photometric_backward += mr.loss / bwd_targets;
        report.selections[lvl].push_back(
            TargetSelection{tau, true, omega, mr.source_index, mr.clip_threshold, mr.clipped});
        if (gradient_out != nullptr)
          photometric_grad(target_img, L.images[t], recons[0], masks[0], warps[0], mr, 0,
                           weights.alpha, decay / bwd_targets, grad[tau][lvl]);
      }
    }

    // Smoothness over every frame's distances.
    const double smooth_decay = weights.smoothness_no_decay ? 1.0 : decay;
    for (int f = 0; f < N; ++f) {
      Grid* g = gradient_out != nullptr ? &grad[f][lvl] : nullptr;
      sl.smoothness +=
          smoothness_term(pyr[f][lvl], L.images[f], smooth_decay * weights.beta / N, g) / N;
    }

    // Cross-sequence distance consistency over all ordered pairs.
    std::vector<const Grid*> D_lvl;
    for (int f = 0; f < N; ++f) D_lvl.push_back(&pyr[f][lvl]);
    const CsdcPass pass = csdc_forward(L.rays, L.intrinsics, D_lvl, poses,
                                       gradient_out != nullptr);
    sl.distance_consistency =
        pass.count > 0 ? pass.sum / static_cast<double>(pass.count) : 0.0;
    if (gradient_out != nullptr) {
      std::vector<Grid*> grad_lvl;
      for (int f = 0; f < N; ++f) grad_lvl.push_back(&grad[f][lvl]);
      csdc_grad(pass, L.rays, L.intrinsics, D_lvl, decay * weights.gamma, grad_lvl);
    }
  }

  report.total = report.recompute_total();

  if (gradient_out != nullptr) {
    for (int f = 0; f < N; ++f) {
      for (int lvl = n_scales - 1; lvl >= 1; --lvl)
        upsample_gradient_into(grad[f][lvl], grad[f][lvl - 1]);
    }
    gradient_out->clear();
    for (int f = 0; f < N; ++f) gradient_out->push_back(std::move(grad[f][0]));
  }
  return report;
}

LossReport total_loss(const SequenceSnippet& snippet, const std::vector<DistanceMap>& D_maps,
                      const SnippetPoses& poses, const LossWeights& weights) {
  weights.validate();
  const LossContext ctx(snippet, weights.n_scales, weights.alpha);
  return evaluate_loss(ctx, D_maps, poses, weights, nullptr);
}

}  // namespace fisheyedist
