#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "noisemorph/image.hpp"
#include "noisemorph/rng.hpp"

namespace noisemorph {

enum class ShuffleKind { pd, intrapatch };

/// Everything needed to undo a shuffle exactly.
struct ShuffleRecord {
  ShuffleKind kind = ShuffleKind::pd;
  /// PD factor (always 2) or intrapatch patch size m.
  std::size_t factor = 2;
  Shape original{};
  std::size_t pad_bottom = 0;
  std::size_t pad_right = 0;
  /// Intrapatch only: per channel, shuffled[i] = original[source[c][i]]
  /// within the channel plane.
  std::vector<std::vector<std::uint32_t>> source;
};

class RecordMismatch : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

/// Stride-2 pixel-shuffle: the four phase subimages tiled 2x2. Odd sizes are
/// edge-replicated up to even first.
std::pair<Image, ShuffleRecord> pd_down(const Image& img);
Image pd_up(const Image& img, const ShuffleRecord& rec);

/// Independently permutes each channel's samples inside every m x m patch
/// (border patches may be smaller). Needs three channels.
std::pair<Image, ShuffleRecord> intrapatch_permute(const Image& img, std::size_t m, RngState rng);
Image intrapatch_restore(const Image& img, const ShuffleRecord& rec);

}  // namespace noisemorph
