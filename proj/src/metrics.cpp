#include "noisemorph/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "noisemorph/fft.hpp"

namespace noisemorph {

double psnr(const Image& a, const Image& b, double peak) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(a.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Image& a, const Image& b, double peak) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  constexpr int kSide = 11;
  constexpr double kSigma = 1.5;
  if (a.height() < kSide || a.width() < kSide) throw ShapeError("ssim: image smaller than the 11x11 window");

  std::array<double, kSide * kSide> win{};
  double total = 0.0;
  for (int y = 0; y < kSide; ++y) {
    for (int x = 0; x < kSide; ++x) {
      const double dy = y - kSide / 2, dx = x - kSide / 2;
      win[y * kSide + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
      total += win[y * kSide + x];
    }
  }
  for (auto& w : win) w /= total;

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const std::size_t oh = a.height() - kSide + 1, ow = a.width() - kSide + 1;
  double acc = 0.0;
  for (std::size_t c = 0; c < a.channels(); ++c) {
    double plane_acc = 0.0;
    for (std::size_t y0 = 0; y0 < oh; ++y0) {
      for (std::size_t x0 = 0; x0 < ow; ++x0) {
        double ma = 0.0, mb = 0.0;
        for (int y = 0; y < kSide; ++y) {
          for (int x = 0; x < kSide; ++x) {
            const double w = win[y * kSide + x];
            ma += w * a.at(c, y0 + y, x0 + x);
            mb += w * b.at(c, y0 + y, x0 + x);
          }
        }
        double va = 0.0, vb = 0.0, cov = 0.0;
        for (int y = 0; y < kSide; ++y) {
          for (int x = 0; x < kSide; ++x) {
            const double w = win[y * kSide + x];
            const double da = a.at(c, y0 + y, x0 + x) - ma;
            const double db = b.at(c, y0 + y, x0 + x) - mb;
            va += w * da * da;
            vb += w * db * db;
            cov += w * da * db;
          }
        }
        plane_acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      }
    }
    acc += plane_acc / static_cast<double>(oh * ow);
  }
  return acc / static_cast<double>(a.channels());
}

double ks_statistic(std::span<const double> samples, double sigma0) {
  if (samples.size() < 2) throw std::invalid_argument("ks_statistic: need at least 2 samples");
  if (!(sigma0 > 0.0)) throw std::invalid_argument("ks_statistic: sigma0 must be > 0");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = 0.5 * std::erfc(-v[i] / (sigma0 * std::numbers::sqrt2));
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double spectral_flatness(const NoiseField& n) {
  if (n.empty()) throw std::invalid_argument("spectral_flatness: empty field");
  double acc = 0.0;
  for (std::size_t c = 0; c < n.channels(); ++c) {
    const auto spec = fft2(n.plane(c), n.height(), n.width());
    std::vector<double> power;
    power.reserve(spec.size() - 1);
    for (std::size_t i = 1; i < spec.size(); ++i) power.push_back(std::norm(spec[i]));
    const double m = mean(power);
    if (!(m > 0.0)) throw std::invalid_argument("spectral_flatness: field has no non-DC power");
    // Exact zeros would send the geometric mean to 0; floor them far below
    // any meaningful bin.
    const double floor = m * 1e-300;
    double log_acc = 0.0;
    for (double p : power) log_acc += std::log(std::max(p, floor));
    acc += std::exp(log_acc / static_cast<double>(power.size())) / m;
  }
  return acc / static_cast<double>(n.channels());
}

double autocorrelation(const NoiseField& n, std::size_t lag) {
  const std::size_t H = n.height(), W = n.width();
  if (lag >= H || lag >= W) throw std::invalid_argument("autocorrelation: lag exceeds the field");
  double acc = 0.0;
  for (std::size_t c = 0; c < n.channels(); ++c) {
    const auto p = n.plane(c);
    const double m = mean(p);
    double var = 0.0, h = 0.0, v = 0.0;
    for (double x : p) var += (x - m) * (x - m);
    if (var == 0.0) continue;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x + lag < W; ++x) h += (p[y * W + x] - m) * (p[y * W + x + lag] - m);
    }
    for (std::size_t y = 0; y + lag < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) v += (p[y * W + x] - m) * (p[(y + lag) * W + x] - m);
    }
    h /= var * static_cast<double>(H * (W - lag)) / static_cast<double>(H * W);
    v /= var * static_cast<double>((H - lag) * W) / static_cast<double>(H * W);
    acc += 0.5 * (h + v);
  }
  return acc / static_cast<double>(n.channels());
}

double mean_patch_channel_correlation(const NoiseField& n, std::size_t window) {
  if (n.channels() != 3) throw ShapeError("mean_patch_channel_correlation: needs 3 channels");
  if (window < 2) throw std::invalid_argument("mean_patch_channel_correlation: window must be >= 2");
  constexpr std::array<std::pair<std::size_t, std::size_t>, 3> kPairs{{{0, 1}, {0, 2}, {1, 2}}};
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + window <= n.height(); y0 += window) {
    for (std::size_t x0 = 0; x0 + window <= n.width(); x0 += window) {
      std::array<double, 3> mu{};
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = y0; y < y0 + window; ++y) {
          for (std::size_t x = x0; x < x0 + window; ++x) mu[c] += n.at(c, y, x);
        }
        mu[c] /= static_cast<double>(window * window);
      }
      for (const auto& [a, b] : kPairs) {
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::size_t y = y0; y < y0 + window; ++y) {
          for (std::size_t x = x0; x < x0 + window; ++x) {
            const double da = n.at(a, y, x) - mu[a], db = n.at(b, y, x) - mu[b];
            sab += da * db;
            saa += da * da;
            sbb += db * db;
          }
        }
        if (saa == 0.0 || sbb == 0.0) continue;
        acc += sab / std::sqrt(saa * sbb);
        ++count;
      }
    }
  }
  if (count == 0) throw std::invalid_argument("mean_patch_channel_correlation: no tile with variance");
  return acc / static_cast<double>(count);
}

}  // namespace noisemorph
