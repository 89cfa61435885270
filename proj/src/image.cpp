#include "noisemorph/image.hpp"

#include <cmath>
#include <numeric>

namespace noisemorph {

std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

NoiseField residual(const Image& a, const Image& b) {
  require_same_shape(a.shape(), b.shape(), "residual");
  NoiseField out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

Image add(const Image& img, const NoiseField& n) {
  require_same_shape(img.shape(), n.shape(), "add");
  Image out(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = img.data()[i] + n.data()[i];
  return out;
}

Image subtract(const Image& img, const NoiseField& n) {
  require_same_shape(img.shape(), n.shape(), "subtract");
  Image out(img.shape());
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = img.data()[i] - n.data()[i];
  return out;
}

std::vector<Image> split_channels(const Image& img) {
  std::vector<Image> planes;
  planes.reserve(img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    auto p = img.plane(c);
    planes.emplace_back(Shape{img.height(), img.width(), 1}, std::vector<double>(p.begin(), p.end()));
  }
  return planes;
}

Image merge_channels(std::span<const Image> planes) {
  if (planes.empty()) throw ShapeError("merge_channels: no planes");
  const Shape first = planes.front().shape();
  Image out(first.height, first.width, planes.size());
  for (std::size_t c = 0; c < planes.size(); ++c) {
    const Shape s = planes[c].shape();
    if (s.channels != 1 || s.height != first.height || s.width != first.width) {
      throw ShapeError("merge_channels: plane " + std::to_string(c) + " has shape " + to_string(s));
    }
    std::copy(planes[c].data().begin(), planes[c].data().end(), out.plane(c).begin());
  }
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace noisemorph
