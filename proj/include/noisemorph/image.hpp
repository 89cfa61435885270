#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisemorph {

/// Thrown when two rasters that must agree in shape do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t plane_size() const { return height * width; }
  std::size_t size() const { return height * width * channels; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

/// Channel-planar raster of doubles. Sample (c, y, x) lives at
/// c * height * width + y * width + x.
///
/// The tag keeps images (values nominally in [0,1]) apart from signed noise
/// fields at the type level; converting between them is explicit.
template <class Tag>
class Raster {
 public:
  Raster() = default;
  Raster(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : shape_{height, width, channels}, data_(height * width * channels, fill) {}
  Raster(Shape shape, double fill = 0.0) : Raster(shape.height, shape.width, shape.channels, fill) {}
  Raster(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw ShapeError("raster data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }

  std::span<double> plane(std::size_t c) {
    return {data_.data() + c * shape_.plane_size(), shape_.plane_size()};
  }
  std::span<const double> plane(std::size_t c) const {
    return {data_.data() + c * shape_.plane_size(), shape_.plane_size()};
  }

  std::span<double> samples() { return data_; }
  std::span<const double> samples() const { return data_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

struct ImageTag {};
struct NoiseTag {};

/// Observed, smoothed, transformed and denoised images.
using Image = Raster<ImageTag>;
/// Signed residuals: estimated noise, transformed noise, textures.
using NoiseField = Raster<NoiseTag>;

template <class To, class From>
To retag(From from) {
  const Shape s = from.shape();
  return To(s, std::move(from.data()));
}

void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// a - b as a noise field.
NoiseField residual(const Image& a, const Image& b);
/// img + n, elementwise.
Image add(const Image& img, const NoiseField& n);
Image subtract(const Image& img, const NoiseField& n);

std::vector<Image> split_channels(const Image& img);
Image merge_channels(std::span<const Image> planes);

/// Mean and population standard deviation over every sample.
double mean(std::span<const double> v);
double stddev(std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace noisemorph
