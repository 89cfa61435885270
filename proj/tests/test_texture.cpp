#include <cmath>

#include "doctest.h"
#include "noisemorph/hist_match.hpp"
#include "noisemorph/rng.hpp"
#include "noisemorph/texture.hpp"

using namespace noisemorph;

namespace {

struct Instance {
  Image s, o;
  NoiseField n1, n2;
};

Instance random_instance(std::size_t h, std::size_t w, std::size_t c, std::uint64_t seed) {
  Rng rng(seed, 0);
  Instance in{Image(h, w, c), Image(h, w, c), NoiseField(h, w, c), NoiseField(h, w, c)};
  for (std::size_t i = 0; i < in.s.size(); ++i) {
    in.s.data()[i] = rng.uniform();
    in.o.data()[i] = in.s.data()[i] + (rng.uniform() < 0.2 ? rng.uniform() - 0.5 : 0.05 * rng.normal());
    in.n2.data()[i] = 0.06 * rng.normal();
  }
  in.n1 = residual(in.o, in.s);
  return in;
}

}  // namespace

TEST_CASE("identity denoiser reproduces the noisy image") {
  const Instance in = random_instance(16, 16, 3, 1);
  const Image t = assemble_transformed(in.s, in.n2);
  const TextureResult r = texture_transform(t, in.s, in.n1, in.n2);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(in.n2.data()[i]) < kRatioGuard) continue;
    // R equals 1 up to the rounding of (S + N2) - S.
    CHECK(std::abs(r.t1.data()[i] - in.n1.data()[i]) <= 1e-12);
    CHECK(std::abs(r.d1.data()[i] - in.o.data()[i]) <= 1e-12);
  }
}

TEST_CASE("perfect denoiser returns the structure") {
  const Instance in = random_instance(8, 8, 1, 2);
  const TextureResult r = texture_transform(in.s, in.s, in.n1, in.n2);
  CHECK(r.d1 == in.s);
  for (double v : r.t1.data()) CHECK(v == 0.0);
}

TEST_CASE("matches a literal per-pixel oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance in = random_instance(8, 8, 3, 10 + seed);
    Rng rng(seed, 5);
    Image d(in.s.shape());
    for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] = in.s.data()[i] + 0.1 * rng.normal();
    const TextureResult r = texture_transform(d, in.s, in.n1, in.n2);
    std::size_t outside = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double n2 = in.n2.data()[i];
      if (std::abs(n2) < kRatioGuard) continue;
      const double t2 = d.data()[i] - in.s.data()[i];
      const double ratio = t2 / n2;
      const double t1 = std::abs(ratio) <= 1.0 ? in.n1.data()[i] * ratio : t2;
      outside += std::abs(ratio) > 1.0;
      CHECK(r.ratio.data()[i] == ratio);
      CHECK(r.t1.data()[i] == t1);
      CHECK(r.d1.data()[i] == in.s.data()[i] + t1);
    }
    CHECK(outside > 0);
  }
}

TEST_CASE("texture is never amplified inside the unit band") {
  const Instance in = random_instance(32, 32, 1, 3);
  Rng rng(3, 3);
  Image d(in.s.shape());
  for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] = in.s.data()[i] + 0.03 * rng.normal();
  const TextureResult r = texture_transform(d, in.s, in.n1, in.n2);
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (std::abs(r.ratio.data()[i]) <= 1.0) CHECK(std::abs(r.t1.data()[i]) <= std::abs(in.n1.data()[i]));
  }
}

TEST_CASE("guarded division") {
  Image s(1, 2, 1, 0.5), d(1, 2, 1);
  d.data() = {0.5 + 1e-9, 0.5 - 1e-9};
  NoiseField n1(1, 2, 1, 0.2), n2(1, 2, 1);
  n2.data() = {0.0, -1e-12};
  const TextureResult r = texture_transform(d, s, n1, n2);
  CHECK(r.ratio.data()[0] == doctest::Approx(1e-9 / kRatioGuard));
  CHECK(r.ratio.data()[1] == doctest::Approx(1e-9 / kRatioGuard));
  CHECK(std::isfinite(r.d1.data()[0]));
  CHECK_THROWS_AS(texture_transform(d, Image(2, 1, 1), n1, n2), ShapeError);
}
