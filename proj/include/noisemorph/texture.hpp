#pragma once

#include "noisemorph/image.hpp"

namespace noisemorph {

struct TextureResult {
  Image d1;       // S + t1
  NoiseField t1;  // texture carried back to the untransformed noise
  NoiseField ratio;
};

/// |N2| below this is replaced by sign(N2) * delta before dividing.
inline constexpr double kRatioGuard = 1e-8;
/// |R| within this of 1 counts as inside the unit band (and is clamped to
/// +-1), so D == T survives the rounding of (S + N2) - S.
inline constexpr double kRatioBandSlack = 1e-9;

/// t2 = D - S, R = t2 / N2, t1 = N1 * R where |R| <= 1 and t2 elsewhere,
/// D1 = S + t1.
TextureResult texture_transform(const Image& d, const Image& s, const NoiseField& n1, const NoiseField& n2);

}  // namespace noisemorph
