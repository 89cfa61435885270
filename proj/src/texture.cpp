#include "noisemorph/texture.hpp"

#include <algorithm>
#include <cmath>

namespace noisemorph {

TextureResult texture_transform(const Image& d, const Image& s, const NoiseField& n1, const NoiseField& n2) {
  require_same_shape(d.shape(), s.shape(), "texture_transform (D vs S)");
  require_same_shape(d.shape(), n1.shape(), "texture_transform (D vs N1)");
  require_same_shape(d.shape(), n2.shape(), "texture_transform (D vs N2)");

  TextureResult res{Image(d.shape()), NoiseField(d.shape()), NoiseField(d.shape())};
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double t2 = d.data()[i] - s.data()[i];
    const double den = n2.data()[i];
    const double safe = std::abs(den) < kRatioGuard ? (den < 0.0 ? -kRatioGuard : kRatioGuard) : den;
    const double r = t2 / safe;
    double t1 = t2;
    if (std::abs(r) <= 1.0 + kRatioBandSlack) t1 = n1.data()[i] * std::clamp(r, -1.0, 1.0);
    res.ratio.data()[i] = r;
    res.t1.data()[i] = t1;
    res.d1.data()[i] = s.data()[i] + t1;
  }
  return res;
}

}  // namespace noisemorph
