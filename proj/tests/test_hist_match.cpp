#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "noisemorph/hist_match.hpp"
#include "noisemorph/metrics.hpp"
#include "noisemorph/noise_synth.hpp"

using namespace noisemorph;

namespace {

double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

NoiseField gaussian_field(std::size_t h, std::size_t w, std::size_t c, double sigma, std::uint64_t seed) {
  Rng rng(seed, 0);
  NoiseField n(h, w, c);
  for (auto& v : n.data()) v = sigma * rng.normal();
  return n;
}

}  // namespace

TEST_CASE("stabilizer noise") {
  const NoiseField base = gaussian_field(8, 8, 1, 0.1, 1);
  CHECK(add_stabilizer_noise(base, 0.0, {}) == base);
  const NoiseField zero(1000, 1000, 1);
  const NoiseField out = add_stabilizer_noise(zero, 0.01, RngState{4, 0});
  CHECK(std::abs(stddev(out.samples()) - 0.01) < 0.01 * 0.01);
  CHECK(add_stabilizer_noise(zero, 0.01, RngState{4, 0}) == out);
}

TEST_CASE("build_cdf exhaustive small case") {
  const std::vector<double> s{0.0, 1.0};
  const EmpiricalCdf cdf = build_cdf(s, 2);
  CHECK(cdf.edges == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(cdf.cum == std::vector<double>{0.0, 0.5, 1.0});
  CHECK_NOTHROW(cdf.validate());
}

TEST_CASE("build_cdf degenerate and override cases") {
  const std::vector<double> same(10, 0.3);
  const EmpiricalCdf d = build_cdf(same, 4);
  CHECK(d.edges.front() == doctest::Approx(0.3 - kDegenerateWidening));
  CHECK(d.edges.back() == doctest::Approx(0.3 + kDegenerateWidening));
  CHECK(d.cum.back() == 1.0);

  const std::vector<double> s{-5.0, 0.1, 0.2, 5.0};
  const std::vector<double> edges{-1.0, 0.0, 1.0};
  const EmpiricalCdf o = build_cdf(s, 0, std::span<const double>(edges));
  CHECK(o.edges == edges);
  CHECK(o.cum == std::vector<double>{0.0, 0.25, 1.0});

  const NoiseField g = gaussian_field(50, 50, 1, 1.0, 2);
  const EmpiricalCdf many = build_cdf(g.samples(), 100);
  CHECK(many.cum.back() == 1.0);
  CHECK(many.edges.front() == *std::min_element(g.data().begin(), g.data().end()));
}

TEST_CASE("gaussian reference CDF") {
  const double s0 = 15.0 / 255.0;
  const EmpiricalCdf ref = gaussian_cdf_reference(s0, 2000);
  CHECK(ref.bins() == 2000);
  CHECK(ref.edges.front() == doctest::Approx(-5 * s0));
  CHECK(ref.edges.back() == doctest::Approx(5 * s0));
  CHECK(ref.cum.front() == 0.0);
  CHECK(ref.cum.back() == 1.0);
  CHECK(std::abs(ref.cum[1000] - 0.5) < 3e-7);
  CHECK(std::abs(ref.cum[1200] - phi(1.0)) < 1e-3);
  CHECK(std::abs(cdf_at(ref, s0) - 0.8413) < 1e-3);
}

TEST_CASE("cdf and quantile interpolation") {
  EmpiricalCdf c{{0.0, 1.0, 2.0, 3.0}, {0.0, 0.5, 0.5, 1.0}};
  CHECK(cdf_at(c, -1.0) == 0.0);
  CHECK(cdf_at(c, 9.0) == 1.0);
  CHECK(cdf_at(c, 0.5) == doctest::Approx(0.25));
  CHECK(cdf_at(c, 1.5) == doctest::Approx(0.5));
  CHECK(quantile_at(c, 0.25) == doctest::Approx(0.5));
  CHECK(quantile_at(c, 0.5) == doctest::Approx(1.0));  // flat stretch resolves left
  CHECK(quantile_at(c, 0.75) == doctest::Approx(2.5));
  CHECK(quantile_at(c, 0.0) == 0.0);
  CHECK(quantile_at(c, 1.0) == 3.0);
}

TEST_CASE("match_values identity, median and monotonicity") {
  const NoiseField g = gaussian_field(64, 64, 1, 1.0, 3);
  const EmpiricalCdf src = build_cdf(g.samples(), 200);
  const double width = src.edges[1] - src.edges[0];
  const auto same = match_values(g.samples(), src, src);
  for (std::size_t i = 0; i < same.size(); ++i) CHECK(std::abs(same[i] - g.data()[i]) <= width);

  const EmpiricalCdf tgt = gaussian_cdf_reference(0.1, 2000);
  const double med_src = quantile_at(src, 0.5);
  const double out = match_values(std::vector<double>{med_src}, src, tgt)[0];
  CHECK(std::abs(out) < 1e-9);

  std::vector<double> sorted(g.data());
  std::sort(sorted.begin(), sorted.end());
  const auto mapped = match_values(sorted, src, tgt);
  CHECK(std::is_sorted(mapped.begin(), mapped.end()));
  const auto ext = match_values(std::vector<double>{-1e9, 1e9}, src, tgt);
  CHECK(ext[0] == tgt.edges.front());
  CHECK(ext[1] == tgt.edges.back());
}

TEST_CASE("global match on gaussian and spiky residuals") {
  MatchConfig cfg;
  const NoiseField g = gaussian_field(128, 128, 3, cfg.sigma0, 5);
  const NoiseField out = global_hist_match(g, cfg);
  CHECK(std::abs(stddev(out.samples()) - cfg.sigma0) < 0.03 * cfg.sigma0);

  NoiseField sp = gaussian_field(128, 128, 1, 0.01, 6);
  Rng rng(6, 1);
  for (auto& v : sp.data()) {
    if (rng.uniform() < 0.2) v += rng.uniform() < 0.5 ? -0.5 : 0.5;
  }
  const NoiseField m = global_hist_match(sp, cfg);
  CHECK(ks_statistic(m.samples(), cfg.sigma0) < 0.02);
  CHECK(ks_statistic(m.samples(), cfg.sigma0) < ks_statistic(sp.samples(), cfg.sigma0));
}

TEST_CASE("block tiling") {
  CHECK(block_offsets(100, 36, 4) == std::vector<std::size_t>{0, 32, 64});
  CHECK(block_offsets(68, 36, 4) == std::vector<std::size_t>{0, 32});
  CHECK(block_offsets(20, 36, 4) == std::vector<std::size_t>{0});
  const auto offs = block_offsets(256, 36, 4);
  CHECK(offs.front() == 0);
  CHECK(offs.back() == 220);
  for (std::size_t i = 1; i < offs.size(); ++i) CHECK(offs[i] - offs[i - 1] <= 32);
  CHECK_THROWS_AS(block_offsets(10, 4, 4), std::invalid_argument);
}

TEST_CASE("local edge grid") {
  MatchConfig cfg;
  cfg.bins = 10;
  const auto e = local_edge_grid(cfg);
  REQUIRE(e.size() == 11);
  CHECK(e.front() == doctest::Approx(-5 * cfg.sigma0 - 0.5));
  CHECK(e.back() == doctest::Approx(5 * cfg.sigma0 + 0.5));
}

TEST_CASE("local match follows the target per block") {
  MatchConfig cfg;
  const NoiseField g = gaussian_field(96, 96, 1, cfg.sigma0, 7);
  const NoiseField out = local_hist_match(g, cfg);
  const double width = 2 * (5 * cfg.sigma0 + 0.5) / static_cast<double>(cfg.bins);
  // Block interiors: a Gaussian block already follows the target up to the
  // sampling error of ~1300 samples.
  double err = 0.0;
  for (std::size_t y = 8; y < 28; ++y) {
    for (std::size_t x = 8; x < 28; ++x) err = std::max(err, std::abs(out.at(0, y, x) - g.at(0, y, x)));
  }
  CHECK(err < 0.5 * cfg.sigma0 + width);

  // Signal-dependent scale: each half gets normalized to sigma0.
  NoiseField sd = g;
  for (std::size_t y = 0; y < 96; ++y) {
    for (std::size_t x = 48; x < 96; ++x) sd.at(0, y, x) *= 4.0;
  }
  const NoiseField m = local_hist_match(sd, cfg);
  std::vector<double> right;
  for (std::size_t y = 0; y < 96; ++y) {
    for (std::size_t x = 64; x < 96; ++x) right.push_back(m.at(0, y, x));
  }
  CHECK(std::abs(stddev(right) - cfg.sigma0) < 0.1 * cfg.sigma0);
}

TEST_CASE("frequency match keeps white noise white and whitens patterns") {
  MatchConfig cfg;
  cfg.rng = RngState{3, 0};
  const NoiseField white = gaussian_field(64, 64, 1, cfg.sigma0, 8);
  const double f0 = spectral_flatness(white);
  const double f1 = spectral_flatness(frequency_hist_match(white, cfg));
  CHECK(std::abs(f1 - f0) < 0.1 * f0);

  const Image flat(64, 64, 1, 0.5);
  const NoiseField circ =
      residual(apply_noise(flat, NoiseSpec{NoiseKind::circular_pattern, 25.0, RngState{9, 0}}), flat);
  CHECK(spectral_flatness(frequency_hist_match(circ, cfg)) > spectral_flatness(circ));
}

TEST_CASE("assemble transformed") {
  const Image s(8, 8, 1, 0.3);
  CHECK(assemble_transformed(s, NoiseField(8, 8, 1)) == s);
  const NoiseField n = gaussian_field(8, 8, 1, 0.1, 10);
  CHECK(assemble_transformed(Image(8, 8, 1), n).data() == n.data());
}
