#include "noisemorph/hist_match.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "noisemorph/fft.hpp"

namespace noisemorph {

namespace {

enum Stream : std::uint64_t { kStabilizer = 11, kFrequencyTarget = 12 };

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::vector<double> linspace(double lo, double hi, std::size_t bins) {
  std::vector<double> e(bins + 1);
  const double step = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + step * static_cast<double>(i);
  e.back() = hi;
  return e;
}

}  // namespace

void EmpiricalCdf::validate() const {
  if (edges.size() < 3 || cum.size() != edges.size()) {
    throw std::invalid_argument("EmpiricalCdf: need B+1 >= 3 edges and as many cumulative values");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("EmpiricalCdf: edges not strictly increasing");
    if (cum[i] < cum[i - 1]) throw std::invalid_argument("EmpiricalCdf: cumulative values decrease");
  }
  if (cum.front() != 0.0 || cum.back() != 1.0) throw std::invalid_argument("EmpiricalCdf: cum must run 0..1");
}

void validate(const MatchConfig& cfg) {
  if (cfg.bins < 2) throw std::invalid_argument("match: bins must be >= 2");
  if (!(cfg.sigma0 > 0.0)) throw std::invalid_argument("match: sigma0 must be > 0");
  if (!(cfg.stabilizer_sigma >= 0.0)) throw std::invalid_argument("match: stabilizer_sigma must be >= 0");
  if (!(cfg.block > cfg.overlap)) throw std::invalid_argument("match: block must exceed overlap");
}

NoiseField add_stabilizer_noise(const NoiseField& n, double stddev, RngState rng) {
  if (!(stddev >= 0.0)) throw std::invalid_argument("add_stabilizer_noise: stddev must be >= 0");
  if (stddev == 0.0) return n;
  NoiseField out = n;
  const RngState base = rng.child(kStabilizer);
  for (std::size_t c = 0; c < n.channels(); ++c) {
    for (std::size_t y = 0; y < n.height(); ++y) {
      Rng r(base.child((static_cast<std::uint64_t>(c) << 32) | y));
      for (std::size_t x = 0; x < n.width(); ++x) out.at(c, y, x) += stddev * r.normal();
    }
  }
  return out;
}

EmpiricalCdf build_cdf(std::span<const double> samples, std::size_t bins,
                       std::optional<std::span<const double>> edges_override) {
  if (samples.size() < 2) throw std::invalid_argument("build_cdf: need at least 2 samples");
  EmpiricalCdf cdf;
  if (edges_override) {
    cdf.edges.assign(edges_override->begin(), edges_override->end());
    if (cdf.edges.size() < 3) throw std::invalid_argument("build_cdf: override needs at least 3 edges");
  } else {
    if (bins < 2) throw std::invalid_argument("build_cdf: bins must be >= 2");
    auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    double a = *lo, b = *hi;
    if (a == b) {
      a -= kDegenerateWidening;
      b += kDegenerateWidening;
    }
    cdf.edges = linspace(a, b, bins);
  }
  const std::size_t nbins = cdf.edges.size() - 1;
  std::vector<std::size_t> counts(nbins, 0);
  for (double v : samples) {
    // Interval j holds [edges[j], edges[j+1]); the last one is closed and
    // also collects everything beyond the range, the first everything below.
    const auto it = std::upper_bound(cdf.edges.begin(), cdf.edges.end(), v);
    const std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(it - cdf.edges.begin() - 1, 0,
                                                        static_cast<std::ptrdiff_t>(nbins) - 1);
    ++counts[static_cast<std::size_t>(j)];
  }
  cdf.cum.assign(nbins + 1, 0.0);
  std::size_t running = 0;
  const auto total = static_cast<double>(samples.size());
  for (std::size_t j = 0; j < nbins; ++j) {
    running += counts[j];
    cdf.cum[j + 1] = static_cast<double>(running) / total;
  }
  cdf.cum.back() = 1.0;
  return cdf;
}

EmpiricalCdf gaussian_cdf_reference(double sigma0, std::size_t bins) {
  if (!(sigma0 > 0.0)) throw std::invalid_argument("gaussian_cdf_reference: sigma0 must be > 0");
  if (bins < 2) throw std::invalid_argument("gaussian_cdf_reference: bins must be >= 2");
  EmpiricalCdf cdf;
  cdf.edges = linspace(-5.0 * sigma0, 5.0 * sigma0, bins);
  // Mirror the lower half so the grid is exactly symmetric.
  for (std::size_t i = 0; i <= bins / 2; ++i) cdf.edges[bins - i] = -cdf.edges[i];
  if (bins % 2 == 0) cdf.edges[bins / 2] = 0.0;
  const double lo = std_normal_cdf(-5.0), hi = std_normal_cdf(5.0);
  cdf.cum.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) cdf.cum[i] = (std_normal_cdf(cdf.edges[i] / sigma0) - lo) / (hi - lo);
  cdf.cum.front() = 0.0;
  cdf.cum.back() = 1.0;
  return cdf;
}

double cdf_at(const EmpiricalCdf& cdf, double v) {
  const auto& e = cdf.edges;
  if (v <= e.front()) return cdf.cum.front();
  if (v >= e.back()) return cdf.cum.back();
  const std::size_t j = static_cast<std::size_t>(std::upper_bound(e.begin(), e.end(), v) - e.begin()) - 1;
  const double t = (v - e[j]) / (e[j + 1] - e[j]);
  return std::clamp(cdf.cum[j] + t * (cdf.cum[j + 1] - cdf.cum[j]), 0.0, 1.0);
}

double quantile_at(const EmpiricalCdf& cdf, double p) {
  const auto& c = cdf.cum;
  const auto& e = cdf.edges;
  if (p <= c.front()) return e.front();
  const auto it = std::lower_bound(c.begin(), c.end(), p);
  if (it == c.end()) return e.back();
  const auto j = static_cast<std::size_t>(it - c.begin());
  if (*it == p) return e[j];
  // c[j-1] < p < c[j]
  const double t = (p - c[j - 1]) / (c[j] - c[j - 1]);
  return e[j - 1] + t * (e[j] - e[j - 1]);
}

std::vector<double> match_values(std::span<const double> values, const EmpiricalCdf& source,
                                 const EmpiricalCdf& target) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = quantile_at(target, cdf_at(source, values[i]));
  return out;
}

NoiseField global_hist_match(const NoiseField& n1, const MatchConfig& cfg) {
  validate(cfg);
  const EmpiricalCdf target = gaussian_cdf_reference(cfg.sigma0, cfg.bins);
  NoiseField out(n1.shape());
  for (std::size_t c = 0; c < n1.channels(); ++c) {
    const auto plane = n1.plane(c);
    const EmpiricalCdf source = build_cdf(plane, cfg.bins);
    const auto matched = match_values(plane, source, target);
    std::copy(matched.begin(), matched.end(), out.plane(c).begin());
  }
  return out;
}

std::vector<double> local_edge_grid(const MatchConfig& cfg) {
  const double half = 5.0 * cfg.sigma0 + 0.5;
  return linspace(-half, half, cfg.bins);
}

std::vector<std::size_t> block_offsets(std::size_t extent, std::size_t block, std::size_t overlap) {
  if (block <= overlap) throw std::invalid_argument("block_offsets: block must exceed overlap");
  if (extent <= block) return {0};
  const std::size_t stride = block - overlap;
  std::vector<std::size_t> offs;
  for (std::size_t o = 0; o + block < extent; o += stride) offs.push_back(o);
  if (offs.back() + block != extent) offs.push_back(extent - block);
  return offs;
}

NoiseField local_hist_match(const NoiseField& n1, const MatchConfig& cfg) {
  validate(cfg);
  const EmpiricalCdf target = gaussian_cdf_reference(cfg.sigma0, cfg.bins);
  const auto grid = local_edge_grid(cfg);
  const std::size_t H = n1.height(), W = n1.width();
  const std::size_t bh = std::min(cfg.block, H), bw = std::min(cfg.block, W);
  const auto ys = block_offsets(H, bh, std::min(cfg.overlap, bh - 1));
  const auto xs = block_offsets(W, bw, std::min(cfg.overlap, bw - 1));

  NoiseField sum(n1.shape());
  std::vector<double> weight(H * W, 0.0);
  for (std::size_t y0 : ys) {
    for (std::size_t x0 : xs) {
      for (std::size_t y = y0; y < y0 + bh; ++y) {
        for (std::size_t x = x0; x < x0 + bw; ++x) weight[y * W + x] += 1.0;
      }
    }
  }

  std::vector<double> block(bh * bw);
  for (std::size_t c = 0; c < n1.channels(); ++c) {
    for (std::size_t y0 : ys) {
      for (std::size_t x0 : xs) {
        for (std::size_t y = 0; y < bh; ++y) {
          for (std::size_t x = 0; x < bw; ++x) block[y * bw + x] = n1.at(c, y0 + y, x0 + x);
        }
        const EmpiricalCdf source = build_cdf(block, cfg.bins, std::span<const double>(grid));
        const auto matched = match_values(block, source, target);
        for (std::size_t y = 0; y < bh; ++y) {
          for (std::size_t x = 0; x < bw; ++x) sum.at(c, y0 + y, x0 + x) += matched[y * bw + x];
        }
      }
    }
    auto p = sum.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= weight[i];
  }
  return sum;
}

NoiseField frequency_hist_match(const NoiseField& n2, const MatchConfig& cfg) {
  validate(cfg);
  const std::size_t H = n2.height(), W = n2.width(), n = H * W;
  NoiseField out(n2.shape());
  std::vector<double> re(n), im(n), target_re(n), reference(n);
  const RngState target_stream = cfg.rng.child(kFrequencyTarget);

  for (std::size_t c = 0; c < n2.channels(); ++c) {
    Rng rng(target_stream.child(c));
    for (auto& v : reference) v = cfg.sigma0 * rng.normal();
    const auto ref_spec = fft2(reference, H, W);
    for (std::size_t i = 0; i < n; ++i) target_re[i] = ref_spec[i].real();
    const EmpiricalCdf target = build_cdf(target_re, cfg.bins);

    auto spec = fft2(n2.plane(c), H, W);
    for (std::size_t i = 0; i < n; ++i) {
      re[i] = spec[i].real();
      im[i] = spec[i].imag();
    }
    const auto re_matched = match_values(re, build_cdf(re, cfg.bins), target);
    const auto im_matched = match_values(im, build_cdf(im, cfg.bins), target);
    for (std::size_t i = 0; i < n; ++i) spec[i] = {re_matched[i], im_matched[i]};

    const auto back = ifft2(spec, H, W);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < n; ++i) dst[i] = back[i].real();
  }
  return out;
}

Image assemble_transformed(const Image& s, const NoiseField& n2) { return add(s, n2); }

}  // namespace noisemorph
