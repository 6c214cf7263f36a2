#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace fisheyedist {

/// Row-major scalar field over a pixel grid. Integer coordinates address
/// pixel centers; continuous coordinates live in [-0.5, width-0.5).
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return width_ * height_; }

  int index(int x, int y) const { return y * width_ + x; }
  double& at(int x, int y) { return data_[index(x, y)]; }
  double at(int x, int y) const { return data_[index(x, y)]; }
  double& operator[](int i) { return data_[i]; }
  double operator[](int i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_size(const Grid& o) const { return width_ == o.width_ && height_ == o.height_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Per-pixel Euclidean distance in meters. Entries must be positive and
/// finite; call validate() at trust boundaries.
class DistanceMap : public Grid {
 public:
  DistanceMap() = default;
  DistanceMap(int width, int height, double fill = 1.0) : Grid(width, height, fill) {}
  explicit DistanceMap(const Grid& g) : Grid(g) {}

  /// Throws std::runtime_error on non-positive or non-finite entries.
  void validate() const;
};

/// Intensity image, samples in [0,1], row-major, channel-interleaved.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels, double fill = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  int size() const { return width_ * height_ * channels_; }

  int index(int x, int y, int c) const { return (y * width_ + x) * channels_ + c; }
  double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_size(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  /// Throws std::runtime_error if any sample is non-finite or outside [0,1].
  void validate() const;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

/// Binary per-pixel weight.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  int size() const { return width_ * height_; }

  int index(int x, int y) const { return y * width_ + x; }
  std::uint8_t& at(int x, int y) { return data_[index(x, y)]; }
  std::uint8_t at(int x, int y) const { return data_[index(x, y)]; }
  std::uint8_t& operator[](int i) { return data_[i]; }
  std::uint8_t operator[](int i) const { return data_[i]; }

  bool same_size(const Mask& o) const { return width_ == o.width_ && height_ == o.height_; }

  int count() const;
  double fraction() const { return size() == 0 ? 0.0 : double(count()) / size(); }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Continuous source coordinates per target pixel plus a validity flag.
/// Valid pixels map inside the source image and the calibrated FOV.
struct FlowField {
  Grid u;
  Grid v;
  Mask valid;

  int width() const { return u.width(); }
  int height() const { return u.height(); }
};

/// One camera-frame point per pixel; invalid pixels (outside the calibrated
/// image circle) carry a zero point.
struct PointCloud {
  int width = 0;
  int height = 0;
  std::vector<Eigen::Vector3d> points;
  std::vector<std::uint8_t> valid;

  int index(int x, int y) const { return y * width + x; }
};

/// 2x2 block average, output dims floor(w/2) x floor(h/2). Requires both
/// input dims >= 2. A trailing odd row/column is dropped.
Grid downsample_half(const Grid& g);
Image downsample_half(const Image& img);

/// Adjoint of downsample_half: distributes a coarse-level gradient back to
/// the fine level (each fine pixel of a block receives grad/4).
void upsample_gradient_into(const Grid& coarse_grad, Grid& fine_grad);

}  // namespace fisheyedist
