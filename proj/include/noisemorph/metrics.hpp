#pragma once

#include <span>
#include <string>

#include "noisemorph/image.hpp"

namespace noisemorph {

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double ks = 0.0;
  double spectral_flatness = 0.0;
  std::string notes;
};

/// 10 log10(peak^2 / MSE) over all samples jointly; +inf for identical
/// inputs.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5) over the
/// valid region, averaged over channels. Needs both sides >= 11.
double ssim(const Image& a, const Image& b, double peak = 1.0);

/// sup |F_n - Phi(v / sigma0)| over the sorted samples.
double ks_statistic(std::span<const double> samples, double sigma0);

/// Geometric over arithmetic mean of the power spectrum without the DC bin,
/// averaged over channels. Throws on an all-zero field.
double spectral_flatness(const NoiseField& n);

/// Normalized autocorrelation at `lag`, averaged over the horizontal and
/// vertical directions and over channels.
double autocorrelation(const NoiseField& n, std::size_t lag);

/// Mean Pearson correlation between channel pairs, computed inside
/// window x window tiles and averaged over tiles and pairs. Tiles where a
/// channel is constant are skipped. Needs three channels.
double mean_patch_channel_correlation(const NoiseField& n, std::size_t window = 8);

}  // namespace noisemorph
