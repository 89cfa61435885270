#include "noisemorph/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace noisemorph {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kNtfMagic{'N', 'T', 'F', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw IoError("NTF1: truncated header");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

Image from_interleaved_u8(const std::vector<std::uint8_t>& px, std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) img.at(k, y, x) = px[(y * w + x) * c + k] / 255.0;
    }
  }
  return img;
}

std::vector<std::uint8_t> to_interleaved_u8(const Image& img) {
  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  std::vector<std::uint8_t> px(h * w * c);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t k = 0; k < c; ++k) px[(y * w + x) * c + k] = quantize_u8(img.at(k, y, x));
    }
  }
  return px;
}

void check_dims(std::size_t h, std::size_t w, std::size_t c, const fs::path& path) {
  if (h == 0 || w == 0) throw IoError(path.string() + ": zero-sized image");
  if (c != 1 && c != 3) throw IoError(path.string() + ": unsupported channel count " + std::to_string(c));
}

Image load_png(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError(path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::size_t c = color ? 3 : 1;
  const std::size_t h = image.height, w = image.width;
  if (h == 0 || w == 0) {
    png_image_free(&image);
    throw IoError(path.string() + ": zero-sized image");
  }
  std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError(path.string() + ": " + msg);
  }
  return from_interleaved_u8(px, h, w, c);
}

void write_png(const Image& img, const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const auto px = to_interleaved_u8(img);
  if (!png_image_write_to_file(&image, path.c_str(), 0, px.data(), 0, nullptr)) {
    throw IoError(path.string() + ": " + image.message);
  }
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::size_t pnm_header_value(std::istream& is, const fs::path& path) {
  int ch = is.get();
  for (;;) {
    while (ch != EOF && std::isspace(ch)) ch = is.get();
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = is.get();
      continue;
    }
    break;
  }
  if (ch == EOF || !std::isdigit(ch)) throw IoError(path.string() + ": malformed PNM header");
  std::size_t v = 0;
  while (ch != EOF && std::isdigit(ch)) {
    v = v * 10 + static_cast<std::size_t>(ch - '0');
    ch = is.get();
  }
  // Exactly one whitespace byte separates maxval from the raster; the
  // terminator of every other token is harmless to consume.
  return v;
}

Image load_pnm(std::istream& is, const fs::path& path, std::size_t channels) {
  const std::size_t w = pnm_header_value(is, path);
  const std::size_t h = pnm_header_value(is, path);
  const std::size_t maxval = pnm_header_value(is, path);
  check_dims(h, w, channels, path);
  if (maxval == 0 || maxval > 255) throw IoError(path.string() + ": only 8-bit PNM is supported");
  std::vector<std::uint8_t> px(h * w * channels);
  if (!is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()))) {
    throw IoError(path.string() + ": truncated PNM raster");
  }
  if (maxval != 255) {
    for (auto& v : px) v = static_cast<std::uint8_t>(std::lround(v * 255.0 / maxval));
  }
  return from_interleaved_u8(px, h, w, channels);
}

void write_pnm(const Image& img, std::ostream& os, bool color) {
  os << (color ? "P6" : "P5") << '\n' << img.width() << ' ' << img.height() << "\n255\n";
  const auto px = to_interleaved_u8(img);
  os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace

std::uint8_t quantize_u8(double v) {
  const double clamped = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
  // std::round rounds half away from zero.
  return static_cast<std::uint8_t>(std::round(clamped * 255.0));
}

void write_ntf(std::ostream& os, const Image& img) {
  static_assert(std::endian::native == std::endian::little, "NTF1 writer assumes little-endian host");
  os.write(kNtfMagic.data(), 4);
  put_u32(os, static_cast<std::uint32_t>(img.height()));
  put_u32(os, static_cast<std::uint32_t>(img.width()));
  put_u32(os, static_cast<std::uint32_t>(img.channels()));
  std::vector<float> buf(img.size());
  std::transform(img.data().begin(), img.data().end(), buf.begin(), [](double v) { return static_cast<float>(v); });
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

Image read_ntf(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), 4) || magic != kNtfMagic) throw IoError("NTF1: bad magic");
  const std::size_t h = get_u32(is);
  const std::size_t w = get_u32(is);
  const std::size_t c = get_u32(is);
  if (h == 0 || w == 0 || c == 0) throw IoError("NTF1: zero-sized image");
  if (c != 1 && c != 3) throw IoError("NTF1: unsupported channel count " + std::to_string(c));
  const std::size_t n = h * w * c;
  std::vector<float> buf(n);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)))) {
    throw IoError("NTF1: truncated payload (expected " + std::to_string(n) + " floats)");
  }
  std::vector<double> data(buf.begin(), buf.end());
  return Image(Shape{h, w, c}, std::move(data));
}

ImageFormat format_from_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (ext == ".png") return ImageFormat::png;
  if (ext == ".pgm") return ImageFormat::pgm;
  if (ext == ".ppm") return ImageFormat::ppm;
  if (ext == ".ntf" || ext == ".ntf1") return ImageFormat::ntf;
  throw IoError(path.string() + ": unsupported file extension '" + ext + "'");
}

Image load_image(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open for reading");
  std::array<char, 4> head{};
  is.read(head.data(), 4);
  if (is.gcount() < 2) throw IoError(path.string() + ": file too short");
  if (is.gcount() == 4 && head == kNtfMagic) {
    is.seekg(0);
    try {
      return read_ntf(is);
    } catch (const IoError& e) {
      throw IoError(path.string() + ": " + e.what());
    }
  }
  if (static_cast<unsigned char>(head[0]) == 0x89 && head[1] == 'P' && head[2] == 'N' && head[3] == 'G') {
    is.close();
    return load_png(path);
  }
  if (head[0] == 'P' && (head[1] == '5' || head[1] == '6')) {
    is.clear();
    is.seekg(2);
    return load_pnm(is, path, head[1] == '6' ? 3 : 1);
  }
  throw IoError(path.string() + ": unsupported image format");
}

void save_image(const Image& img, const fs::path& path) { save_image(img, path, format_from_extension(path)); }

void save_image(const Image& img, const fs::path& path, ImageFormat format) {
  if (img.empty()) throw IoError(path.string() + ": refusing to write an empty image");
  if (format == ImageFormat::pgm && img.channels() != 1) throw IoError(path.string() + ": PGM needs 1 channel");
  if (format == ImageFormat::ppm && img.channels() != 3) throw IoError(path.string() + ": PPM needs 3 channels");

  fs::path tmp = path;
  tmp += ".tmp";
  try {
    if (format == ImageFormat::png) {
      write_png(img, tmp);
    } else {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) throw IoError(tmp.string() + ": cannot open for writing");
      if (format == ImageFormat::ntf) {
        write_ntf(os, img);
      } else {
        write_pnm(img, os, format == ImageFormat::ppm);
      }
      os.close();
      if (!os) throw IoError(tmp.string() + ": write failed");
    }
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

}  // namespace noisemorph
