#include "noisemorph/noise_synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace noisemorph {

namespace {

constexpr std::array<std::pair<NoiseKind, std::string_view>, 11> kKindNames{{
    {NoiseKind::gaussian, "gaussian"},
    {NoiseKind::uniform, "uniform"},
    {NoiseKind::salt_pepper, "salt_pepper"},
    {NoiseKind::impulse, "impulse"},
    {NoiseKind::bernoulli, "bernoulli"},
    {NoiseKind::poisson, "poisson"},
    {NoiseKind::speckle, "speckle"},
    {NoiseKind::circular_pattern, "circular_pattern"},
    {NoiseKind::stripe, "stripe"},
    {NoiseKind::grid, "grid"},
    {NoiseKind::channel_replicated_gaussian, "channel_replicated_gaussian"},
}};

constexpr double kStripePeriod = 8.0;
constexpr std::array<double, 3> kStripeAnglesDeg{0.0, 30.0, 60.0};

// Streams for the different random draws of one spec.
enum Stream : std::uint64_t { kSamples = 1, kMask = 2, kMaskValues = 3, kPhase = 4 };

Rng row_rng(const NoiseSpec& spec, std::size_t c, std::size_t y) {
  return Rng(spec.rng.child(kSamples).child((static_cast<std::uint64_t>(c) << 32) | y));
}

// First k entries of a partial Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

template <class Fn>
void per_sample(Image& out, const NoiseSpec& spec, Fn fn) {
  for (std::size_t c = 0; c < out.channels(); ++c) {
    for (std::size_t y = 0; y < out.height(); ++y) {
      Rng rng = row_rng(spec, c, y);
      for (std::size_t x = 0; x < out.width(); ++x) out.at(c, y, x) = fn(out.at(c, y, x), rng);
    }
  }
}

std::vector<double> gaussian_plane(const NoiseSpec& spec, std::size_t c, std::size_t h, std::size_t w,
                                   double sigma) {
  std::vector<double> plane(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    Rng rng = row_rng(spec, c, y);
    for (std::size_t x = 0; x < w; ++x) plane[y * w + x] = sigma * rng.normal();
  }
  return plane;
}

// Periodic convolution of i.i.d. noise with the ring, rescaled to `sigma`.
std::vector<double> circular_plane(const NoiseSpec& spec, std::size_t c, std::size_t h, std::size_t w,
                                   double sigma) {
  const int r = 4;
  const auto kernel = ring_kernel(r);
  const auto white = gaussian_plane(spec, c, h, w, 1.0);
  const int side = 2 * r + 1;
  std::vector<double> out(h * w, 0.0);
  const auto H = static_cast<long>(h), W = static_cast<long>(w);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double k = kernel[(dy + r) * side + (dx + r)];
          if (k == 0.0) continue;
          const long yy = ((y + dy) % H + H) % H;
          const long xx = ((x + dx) % W + W) % W;
          acc += k * white[yy * W + xx];
        }
      }
      out[y * W + x] = acc;
    }
  }
  const double sd = stddev(out);
  const double m = mean(out);
  for (auto& v : out) v = (v - m) * (sd > 0.0 ? sigma / sd : 0.0);
  return out;
}

double stripe_value(double y, double x, double angle_deg, double phase) {
  const double th = angle_deg * std::numbers::pi / 180.0;
  return std::sin(2.0 * std::numbers::pi * (x * std::cos(th) + y * std::sin(th)) / kStripePeriod + phase);
}

}  // namespace

std::string_view to_string(NoiseKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<NoiseKind> parse_noise_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_density_kind(NoiseKind kind) {
  return kind == NoiseKind::salt_pepper || kind == NoiseKind::impulse || kind == NoiseKind::bernoulli;
}

void validate(const NoiseSpec& spec) {
  if (!(spec.level > 0.0) || !std::isfinite(spec.level)) {
    throw std::invalid_argument(std::string(to_string(spec.kind)) + ": level must be > 0");
  }
  if (is_density_kind(spec.kind) && spec.level >= 1.0) {
    throw std::invalid_argument(std::string(to_string(spec.kind)) + ": density must lie in (0,1)");
  }
}

std::size_t counted_mask_size(double density, std::size_t n) {
  return static_cast<std::size_t>(std::llround(density * static_cast<double>(n)));
}

std::vector<double> ring_kernel(int radius) {
  const int side = 2 * radius + 1;
  std::vector<double> k(static_cast<std::size_t>(side * side), 0.0);
  double norm2 = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double d = std::hypot(dy, dx);
      if (std::abs(d - radius) <= 0.5) {
        k[(dy + radius) * side + (dx + radius)] = 1.0;
        norm2 += 1.0;
      }
    }
  }
  for (auto& v : k) v /= std::sqrt(norm2);
  return k;
}

Image apply_noise(const Image& clean, const NoiseSpec& spec) {
  validate(spec);
  Image out = clean;
  const double sigma = spec.level / 255.0;
  const std::size_t h = clean.height(), w = clean.width(), nc = clean.channels();

  switch (spec.kind) {
    case NoiseKind::gaussian:
      per_sample(out, spec, [&](double v, Rng& r) { return v + sigma * r.normal(); });
      break;
    case NoiseKind::uniform:
      per_sample(out, spec, [&](double v, Rng& r) { return v + spec.level * (2.0 * r.uniform() - 1.0); });
      break;
    case NoiseKind::speckle:
      per_sample(out, spec, [&](double v, Rng& r) { return v + v * sigma * r.normal(); });
      break;
    case NoiseKind::poisson:
      per_sample(out, spec, [&](double v, Rng& r) {
        return static_cast<double>(r.poisson(std::max(v, 0.0) * spec.level)) / spec.level;
      });
      break;
    case NoiseKind::salt_pepper: {
      Rng mask_rng(spec.rng.child(kMask));
      Rng value_rng(spec.rng.child(kMaskValues));
      const auto pixels = sample_without_replacement(h * w, counted_mask_size(spec.level, h * w), mask_rng);
      for (std::size_t p : pixels) {
        const double v = value_rng.uniform() < 0.5 ? 0.0 : 1.0;
        for (std::size_t c = 0; c < nc; ++c) out.plane(c)[p] = v;
      }
      break;
    }
    case NoiseKind::impulse: {
      Rng mask_rng(spec.rng.child(kMask));
      Rng value_rng(spec.rng.child(kMaskValues));
      for (std::size_t s : sample_without_replacement(out.size(), counted_mask_size(spec.level, out.size()), mask_rng)) {
        out.data()[s] = value_rng.uniform();
      }
      break;
    }
    case NoiseKind::bernoulli: {
      Rng mask_rng(spec.rng.child(kMask));
      for (std::size_t s : sample_without_replacement(out.size(), counted_mask_size(spec.level, out.size()), mask_rng)) {
        out.data()[s] = 0.0;
      }
      break;
    }
    case NoiseKind::circular_pattern:
      for (std::size_t c = 0; c < nc; ++c) {
        const auto n = circular_plane(spec, c, h, w, sigma);
        auto p = out.plane(c);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += n[i];
      }
      break;
    case NoiseKind::stripe:
    case NoiseKind::grid: {
      Rng phase_rng(spec.rng.child(kPhase));
      for (std::size_t c = 0; c < nc; ++c) {
        const double angle = kStripeAnglesDeg[c % 3];
        const double phase1 = 2.0 * std::numbers::pi * phase_rng.uniform();
        const double phase2 = 2.0 * std::numbers::pi * phase_rng.uniform();
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            double n = stripe_value(double(y), double(x), angle, phase1);
            if (spec.kind == NoiseKind::grid) n += stripe_value(double(y), double(x), angle + 90.0, phase2);
            out.at(c, y, x) += sigma * n;
          }
        }
      }
      break;
    }
    case NoiseKind::channel_replicated_gaussian: {
      if (nc != 3) throw std::invalid_argument("channel_replicated_gaussian needs a 3-channel image");
      const auto n = gaussian_plane(spec, 0, h, w, sigma);
      for (std::size_t c = 0; c < nc; ++c) {
        auto p = out.plane(c);
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += n[i];
      }
      break;
    }
  }
  return out;
}

double mean_brightness(const Image& img) { return mean(img.samples()); }

}  // namespace noisemorph
