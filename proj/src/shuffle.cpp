#include "noisemorph/shuffle.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace noisemorph {

std::pair<Image, ShuffleRecord> pd_down(const Image& img) {
  const std::size_t h = img.height(), w = img.width();
  if (h == 0 || w == 0) throw ShapeError("pd_down: empty image");
  ShuffleRecord rec;
  rec.kind = ShuffleKind::pd;
  rec.factor = 2;
  rec.original = img.shape();
  rec.pad_bottom = h % 2;
  rec.pad_right = w % 2;
  const std::size_t H = h + rec.pad_bottom, W = w + rec.pad_right;
  const std::size_t h2 = H / 2, w2 = W / 2;

  Image out(H, W, img.channels());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      const std::size_t sy = std::min(y, h - 1);
      const std::size_t ty = (y % 2) * h2 + y / 2;
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t sx = std::min(x, w - 1);
        out.at(c, ty, (x % 2) * w2 + x / 2) = img.at(c, sy, sx);
      }
    }
  }
  return {std::move(out), std::move(rec)};
}

Image pd_up(const Image& img, const ShuffleRecord& rec) {
  if (rec.kind != ShuffleKind::pd || rec.factor != 2) throw RecordMismatch("pd_up: record is not a PD record");
  const std::size_t H = rec.original.height + rec.pad_bottom, W = rec.original.width + rec.pad_right;
  if (img.height() != H || img.width() != W || img.channels() != rec.original.channels) {
    throw RecordMismatch("pd_up: image " + to_string(img.shape()) + " does not match record for " +
                         to_string(rec.original));
  }
  const std::size_t h2 = H / 2, w2 = W / 2;
  Image out(rec.original);
  for (std::size_t c = 0; c < img.channels(); ++c) {
    for (std::size_t y = 0; y < rec.original.height; ++y) {
      for (std::size_t x = 0; x < rec.original.width; ++x) {
        out.at(c, y, x) = img.at(c, (y % 2) * h2 + y / 2, (x % 2) * w2 + x / 2);
      }
    }
  }
  return out;
}

std::pair<Image, ShuffleRecord> intrapatch_permute(const Image& img, std::size_t m, RngState rng) {
  if (img.channels() != 3) {
    throw ShapeError("intrapatch_permute: needs 3 channels, got " + std::to_string(img.channels()));
  }
  if (m < 1) throw std::invalid_argument("intrapatch_permute: patch size must be >= 1");
  const std::size_t H = img.height(), W = img.width();
  ShuffleRecord rec;
  rec.kind = ShuffleKind::intrapatch;
  rec.factor = m;
  rec.original = img.shape();
  rec.source.assign(3, std::vector<std::uint32_t>(H * W));
  for (auto& s : rec.source) std::iota(s.begin(), s.end(), std::uint32_t{0});

  if (m > 1) {
    std::vector<std::uint32_t> cells;
    std::uint64_t patch = 0;
    for (std::size_t y0 = 0; y0 < H; y0 += m) {
      for (std::size_t x0 = 0; x0 < W; x0 += m, ++patch) {
        cells.clear();
        for (std::size_t y = y0; y < std::min(y0 + m, H); ++y) {
          for (std::size_t x = x0; x < std::min(x0 + m, W); ++x) cells.push_back(static_cast<std::uint32_t>(y * W + x));
        }
        for (std::size_t c = 0; c < 3; ++c) {
          Rng r(rng.child((patch << 2) | c));
          std::vector<std::uint32_t> order = cells;
          for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[r.below(i)]);
          for (std::size_t i = 0; i < cells.size(); ++i) rec.source[c][cells[i]] = order[i];
        }
      }
    }
  }

  Image out(img.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    const auto src = img.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = src[rec.source[c][i]];
  }
  return {std::move(out), std::move(rec)};
}

Image intrapatch_restore(const Image& img, const ShuffleRecord& rec) {
  if (rec.kind != ShuffleKind::intrapatch) throw RecordMismatch("intrapatch_restore: record is not intrapatch");
  if (!(img.shape() == rec.original) || rec.source.size() != img.channels()) {
    throw RecordMismatch("intrapatch_restore: image " + to_string(img.shape()) + " does not match record for " +
                         to_string(rec.original));
  }
  Image out(img.shape());
  for (std::size_t c = 0; c < img.channels(); ++c) {
    const auto src = img.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[rec.source[c][i]] = src[i];
  }
  return out;
}

}  // namespace noisemorph
