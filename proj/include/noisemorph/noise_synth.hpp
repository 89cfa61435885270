#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "noisemorph/image.hpp"
#include "noisemorph/rng.hpp"

namespace noisemorph {

enum class NoiseKind {
  gaussian,
  uniform,
  salt_pepper,
  impulse,
  bernoulli,
  poisson,
  speckle,
  circular_pattern,
  stripe,
  grid,
  channel_replicated_gaussian,
};

std::string_view to_string(NoiseKind kind);
std::optional<NoiseKind> parse_noise_kind(std::string_view name);

/// `level` is sigma in 8-bit units for gaussian-like kinds, the half-width
/// x for uniform, the density d for salt_pepper/impulse/bernoulli and the
/// photon scale lambda for poisson.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double level = 25.0;
  RngState rng{};
};

bool is_density_kind(NoiseKind kind);

/// Throws std::invalid_argument for a bad level or a kind that needs three
/// channels on a grayscale image.
void validate(const NoiseSpec& spec);

Image apply_noise(const Image& clean, const NoiseSpec& spec);

double mean_brightness(const Image& img);

// Exposed for tests.

/// Ring of radius 4 and thickness 1 with unit l2 norm, as a (2r+1)^2 square.
std::vector<double> ring_kernel(int radius = 4);

/// Number of positions a counted density mask flips: round(d * n).
std::size_t counted_mask_size(double density, std::size_t n);

}  // namespace noisemorph
