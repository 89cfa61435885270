#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "noisemorph/rng.hpp"
#include "noisemorph/smoothing.hpp"

using namespace noisemorph;

namespace {

Image random_image(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed, 0);
  Image img(h, w, c);
  for (auto& v : img.data()) v = rng.uniform();
  return img;
}

// Piecewise-constant blocks plus noise: strong edges and texture, the regime
// the weights are built for.
Image blocky_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed, 1);
  Image img(h, w, 1);
  const double a = rng.uniform(), b = rng.uniform();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) img.at(0, y, x) = (x < w / 2 ? a : b) + 0.05 * rng.normal();
  }
  return img;
}

// Brute-force weights: 2-D Gaussian window over the clamped gradient field.
Eigen::MatrixXd oracle_weight(const Image& img, const RtvConfig& cfg, bool horizontal) {
  const long H = static_cast<long>(img.height()), W = static_cast<long>(img.width());
  auto grad = [&](long y, long x) {
    if (horizontal) return x + 1 < W ? img.at(0, y, x + 1) - img.at(0, y, x) : 0.0;
    return y + 1 < H ? img.at(0, y + 1, x) - img.at(0, y, x) : 0.0;
  };
  const int r = cfg.window_radius;
  double norm = 0.0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) norm += std::exp(-(dy * dy + dx * dx) / (2 * cfg.sigma_g * cfg.sigma_g));
  }
  Eigen::MatrixXd out(H, W);
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double g = std::exp(-(dy * dy + dx * dx) / (2 * cfg.sigma_g * cfg.sigma_g)) / norm;
          acc += g * grad(std::clamp(y + dy, 0L, H - 1), std::clamp(x + dx, 0L, W - 1));
        }
      }
      out(y, x) = 1.0 / (std::abs(acc) + cfg.epsilon_w) / (std::abs(grad(y, x)) + cfg.epsilon_v);
    }
  }
  return out;
}

// Dense I + alpha * D^T diag(w) D assembled from explicit difference rows.
Eigen::MatrixXd dense_system(const RtvWeights& w, std::size_t h, std::size_t wd, double alpha) {
  const long n = static_cast<long>(h * wd);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < wd; ++x) {
      const long i = static_cast<long>(y * wd + x);
      if (x + 1 < wd) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        d(i) = -1;
        d(i + 1) = 1;
        a += alpha * w.horizontal.at(0, y, x) * d * d.transpose();
      }
      if (y + 1 < h) {
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        d(i) = -1;
        d(i + static_cast<long>(wd)) = 1;
        a += alpha * w.vertical.at(0, y, x) * d * d.transpose();
      }
    }
  }
  return a;
}

}  // namespace

TEST_CASE("median filter") {
  Image img(3, 3, 1);
  img.data() = {1, 2, 3, 4, 100, 6, 7, 8, 9};
  CHECK(median_filter(img, 3).at(0, 1, 1) == 6.0);
  const Image r = random_image(9, 11, 3, 1);
  CHECK(median_filter(r, 1) == r);
  const Image flat(10, 10, 3, 0.25);
  CHECK(median_filter(flat, 5) == flat);
  CHECK_THROWS_AS(median_filter(r, 4), std::invalid_argument);
}

TEST_CASE("forward differences") {
  Image img(2, 3, 1);
  img.data() = {0, 1, 3, 2, 2, 2};
  const auto gh = gradient_horizontal(img);
  const auto gv = gradient_vertical(img);
  CHECK(gh.data() == std::vector<double>{1, 2, 0, 0, 0, 0});
  CHECK(gv.data() == std::vector<double>{2, 1, -1, 0, 0, 0});
}

TEST_CASE("weights on a constant image") {
  const RtvConfig cfg;
  const auto w = rtv_weights(Image(12, 12, 3, 0.3), cfg);
  const double expected = (1.0 / cfg.epsilon_w) / cfg.epsilon_v;
  for (double v : w.horizontal.data()) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  for (double v : w.vertical.data()) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("weights match a brute-force windowed oracle") {
  RtvConfig cfg;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Image img = blocky_image(20, 17, seed);
    const auto w = rtv_weights(img, cfg);
    const auto oh = oracle_weight(img, cfg, true);
    const auto ov = oracle_weight(img, cfg, false);
    for (std::size_t y = 0; y < 20; ++y) {
      for (std::size_t x = 0; x < 17; ++x) {
        CHECK(w.horizontal.at(0, y, x) == doctest::Approx(oh(y, x)).epsilon(1e-10));
        CHECK(w.vertical.at(0, y, x) == doctest::Approx(ov(y, x)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("operator matches the dense system") {
  const RtvConfig cfg;
  const Image img = blocky_image(8, 9, 4);
  const auto w = rtv_weights(img, cfg);
  const auto a = dense_system(w, 8, 9, cfg.alpha);
  const Image s = random_image(8, 9, 1, 5);
  std::vector<double> out(72);
  rtv_apply_operator(s.plane(0), w.horizontal.plane(0), w.vertical.plane(0), 8, 9, cfg.alpha, out);
  const Eigen::VectorXd ref = a * Eigen::Map<const Eigen::VectorXd>(s.data().data(), 72);
  for (long i = 0; i < 72; ++i) CHECK(out[i] == doctest::Approx(ref(i)).epsilon(1e-12));
}

TEST_CASE("CG agrees with a dense direct solve on seeded 16x16 instances") {
  RtvConfig cfg;
  cfg.solver_tol = 1e-10;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image obs = seed % 2 ? blocky_image(16, 16, seed) : random_image(16, 16, 1, seed);
    const auto w = rtv_weights(obs, cfg);
    SolveStats stats;
    const Image s = rtv_solve(obs, w, cfg, &stats);
    CHECK(stats.relative_residual <= 1e-10);
    const Eigen::VectorXd ref = dense_system(w, 16, 16, cfg.alpha)
                                    .ldlt()
                                    .solve(Eigen::Map<const Eigen::VectorXd>(obs.data().data(), 256));
    double err = 0.0;
    for (long i = 0; i < 256; ++i) err = std::max(err, std::abs(s.data()[i] - ref(i)));
    CHECK(err < 1e-8);
  }
}

TEST_CASE("solve is the minimizer of the objective") {
  const RtvConfig cfg;
  const Image obs = blocky_image(16, 16, 9);
  const auto w = rtv_weights(obs, cfg);
  const Image s = rtv_solve(obs, w, cfg);
  const double f0 = rtv_objective(s, obs, w, cfg.alpha);
  Rng rng(9, 9);
  for (int k = 0; k < 5; ++k) {
    Image p = s;
    for (auto& v : p.data()) v += 1e-3 * rng.normal();
    CHECK(rtv_objective(p, obs, w, cfg.alpha) > f0);
  }
}

TEST_CASE("solve trivial cases") {
  RtvConfig cfg;
  const Image obs = random_image(10, 12, 3, 3);
  cfg.alpha = 0.0;
  CHECK(rtv_solve(obs, rtv_weights(obs, cfg), cfg) == obs);
  cfg.alpha = 0.5;
  const Image flat(10, 12, 3, 0.6);
  const Image s = rtv_solve(flat, rtv_weights(flat, cfg), cfg);
  for (double v : s.data()) CHECK(v == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("solver failure is reported") {
  RtvConfig cfg;
  cfg.solver_max_iter = 1;
  cfg.solver_tol = 1e-14;
  const Image obs = random_image(32, 32, 1, 4);
  CHECK_THROWS_AS(rtv_solve(obs, rtv_weights(obs, cfg), cfg), SolverError);
}

TEST_CASE("rtv smoothing keeps constants and reduces noise") {
  const RtvConfig cfg;
  const Image flat(24, 24, 1, 0.4);
  const Image s = rtv_smooth(flat, cfg);
  for (double v : s.data()) CHECK(v == doctest::Approx(0.4).epsilon(1e-12));

  const Image noisy = blocky_image(48, 48, 2);
  const Image sm = rtv_smooth(noisy, cfg);
  const auto tv = [](const Image& im) {
    double acc = 0;
    for (double v : gradient_horizontal(im).data()) acc += std::abs(v);
    return acc;
  };
  CHECK(tv(sm) < 0.5 * tv(noisy));
}

TEST_CASE("initial noise estimate") {
  const Image flat(16, 16, 3, 0.5);
  const SmoothResult r = estimate_initial_noise(flat, RtvConfig{}, 3);
  for (double v : r.residual.data()) CHECK(std::abs(v) < 1e-6);

  const Image img = random_image(16, 16, 1, 8);
  const SmoothResult q = estimate_initial_noise(img, RtvConfig{}, 3);
  const Image back = add(q.smoothed, q.residual);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(back.data()[i] == doctest::Approx(img.data()[i]).epsilon(1e-14));
}
