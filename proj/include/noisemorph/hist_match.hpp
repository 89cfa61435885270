#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "noisemorph/image.hpp"
#include "noisemorph/rng.hpp"

namespace noisemorph {

/// Interval-based cumulative distribution: `edges` holds the B+1 interval
/// divisions and `cum[i]` the fraction of samples falling in the first i
/// intervals, so cum.front() == 0 and cum.back() == 1.
struct EmpiricalCdf {
  std::vector<double> edges;
  std::vector<double> cum;

  std::size_t bins() const { return edges.empty() ? 0 : edges.size() - 1; }
  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;
};

struct MatchConfig {
  double sigma0 = 15.0 / 255.0;
  std::size_t bins = 2000;
  double stabilizer_sigma = 0.01;
  std::size_t block = 36;
  std::size_t overlap = 4;
  RngState rng{};
};

void validate(const MatchConfig& cfg);

/// Widening applied to a zero-width sample range.
inline constexpr double kDegenerateWidening = 1e-6;

NoiseField add_stabilizer_noise(const NoiseField& n, double stddev, RngState rng);

/// Histogram of `samples` over B equal intervals spanning [min, max] (each
/// interval half-open except the last), accumulated and prefixed with 0.
/// With `edges_override`, those edges are used instead and samples outside
/// them are counted into the end intervals.
EmpiricalCdf build_cdf(std::span<const double> samples, std::size_t bins,
                       std::optional<std::span<const double>> edges_override = std::nullopt);

/// Analytic N(0, sigma0) CDF on B equal intervals over [-5 sigma0, 5 sigma0],
/// renormalized to run from exactly 0 to exactly 1.
EmpiricalCdf gaussian_cdf_reference(double sigma0, std::size_t bins);

/// Forward interpolation of a CDF, clamped to [0,1] outside the edge range.
double cdf_at(const EmpiricalCdf& cdf, double v);
/// Inverse interpolation. Flat stretches of `cum` resolve to their left edge.
double quantile_at(const EmpiricalCdf& cdf, double p);

/// source CDF, then inverse target CDF. Non-decreasing in each value.
std::vector<double> match_values(std::span<const double> values, const EmpiricalCdf& source,
                                 const EmpiricalCdf& target);

/// Per-channel matching of the whole field to N(0, sigma0).
NoiseField global_hist_match(const NoiseField& n1, const MatchConfig& cfg);

/// Edge grid shared by every block in local matching:
/// B intervals over [-5 sigma0 - 0.5, 5 sigma0 + 0.5].
std::vector<double> local_edge_grid(const MatchConfig& cfg);

/// Top-left block offsets along one axis: stride block - overlap, with the
/// last block pushed flush against the far border.
std::vector<std::size_t> block_offsets(std::size_t extent, std::size_t block, std::size_t overlap);

/// b x b blocks with k pixels of overlap, each matched on the shared edge
/// grid; overlapping outputs are averaged.
NoiseField local_hist_match(const NoiseField& n1, const MatchConfig& cfg);

/// Matches the real and imaginary parts of each channel's spectrum to the
/// real-part distribution of the spectrum of a seeded N(0, sigma0) field of
/// the same size, then keeps the real part of the inverse transform.
NoiseField frequency_hist_match(const NoiseField& n2, const MatchConfig& cfg);

/// T = S + N2.
Image assemble_transformed(const Image& s, const NoiseField& n2);

}  // namespace noisemorph
