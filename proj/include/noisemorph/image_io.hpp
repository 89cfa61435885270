#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "noisemorph/image.hpp"

namespace noisemorph {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Supported file formats. Chosen from the file extension on save and from
/// the magic bytes on load.
enum class ImageFormat { png, pgm, ppm, ntf };

/// Loads PNG, binary PGM/PPM (P5/P6, maxval <= 255) or an NTF1 float
/// container. 8-bit samples v become v / 255.
Image load_image(const std::filesystem::path& path);

/// Writes atomically (temp file + rename). 8-bit formats clamp to [0,1] and
/// quantize with round-half-away-from-zero; NTF1 stores the samples as
/// 32-bit floats.
void save_image(const Image& img, const std::filesystem::path& path);
void save_image(const Image& img, const std::filesystem::path& path, ImageFormat format);

ImageFormat format_from_extension(const std::filesystem::path& path);

/// 8-bit export rule.
std::uint8_t quantize_u8(double v);

// NTF1 container: "NTF1", u32 height, u32 width, u32 channels (little
// endian), then height*width*channels little-endian f32, plane-major.
void write_ntf(std::ostream& os, const Image& img);
Image read_ntf(std::istream& is);

}  // namespace noisemorph
