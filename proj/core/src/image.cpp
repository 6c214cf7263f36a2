#include "fisheyedist/image.hpp"

#include <cmath>
#include <stdexcept>

namespace fisheyedist {

Grid::Grid(int width, int height, double fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("Grid: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

void DistanceMap::validate() const {
  for (double d : data()) {
    if (!std::isfinite(d) || d <= 0.0)
      throw std::runtime_error("DistanceMap: entries must be positive and finite");
  }
}

Image::Image(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("Image: dimensions must be positive");
  if (channels != 1 && channels != 3) throw std::invalid_argument("Image: channels must be 1 or 3");
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

void Image::validate() const {
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::runtime_error("Image: samples must be finite and in [0,1]");
  }
}

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("Mask: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

int Mask::count() const {
  int n = 0;
  for (std::uint8_t m : data_) n += m;
  return n;
}

Grid downsample_half(const Grid& g) {
  if (g.width() < 2 || g.height() < 2)
    throw std::invalid_argument("downsample_half: need at least 2x2 input");
  Grid out(g.width() / 2, g.height() / 2);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      out.at(x, y) = 0.25 * (g.at(2 * x, 2 * y) + g.at(2 * x + 1, 2 * y) +
                             g.at(2 * x, 2 * y + 1) + g.at(2 * x + 1, 2 * y + 1));
  return out;
}

Image downsample_half(const Image& img) {
  if (img.width() < 2 || img.height() < 2)
    throw std::invalid_argument("downsample_half: need at least 2x2 input");
  Image out(img.width() / 2, img.height() / 2, img.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        out.at(x, y, c) = 0.25 * (img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) +
                                  img.at(2 * x, 2 * y + 1, c) + img.at(2 * x + 1, 2 * y + 1, c));
  return out;
}

void upsample_gradient_into(const Grid& coarse_grad, Grid& fine_grad) {
  if (coarse_grad.width() != fine_grad.width() / 2 || coarse_grad.height() != fine_grad.height() / 2)
    throw std::invalid_argument("upsample_gradient_into: dimension mismatch");
  for (int y = 0; y < coarse_grad.height(); ++y)
    for (int x = 0; x < coarse_grad.width(); ++x) {
      const double g = 0.25 * coarse_grad.at(x, y);
      fine_grad.at(2 * x, 2 * y) += g;
      fine_grad.at(2 * x + 1, 2 * y) += g;
      fine_grad.at(2 * x, 2 * y + 1) += g;
      fine_grad.at(2 * x + 1, 2 * y + 1) += g;
    }
}

}  // namespace fisheyedist
