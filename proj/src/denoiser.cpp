#include "noisemorph/denoiser.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fcntl.h>
#include <fstream>
#include <numbers>
#include <sstream>

#include "noisemorph/hist_match.hpp"
#include "noisemorph/image_io.hpp"

extern char** environ;

namespace noisemorph {

namespace fs = std::filesystem;

namespace {

using Mat8 = std::array<std::array<double, 8>, 8>;

const Mat8& dct_matrix() {
  static const Mat8 m = [] {
    Mat8 d{};
    for (int k = 0; k < 8; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) d[k][n] = a * std::cos(std::numbers::pi * (2 * n + 1) * k / 16.0);
    }
    return d;
  }();
  return m;
}

// Orthonormal opponent basis: luminance, red-blue, green-magenta.
constexpr double kInvSqrt3 = 0.57735026918962576451;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt6 = 0.40824829046386301637;
constexpr std::array<std::array<double, 3>, 3> kOpponent{{
    {kInvSqrt3, kInvSqrt3, kInvSqrt3},
    {kInvSqrt2, 0.0, -kInvSqrt2},
    {kInvSqrt6, -2.0 * kInvSqrt6, kInvSqrt6},
}};

Image to_opponent(const Image& img, bool inverse) {
  if (img.channels() != 3) return img;
  Image out(img.shape());
  for (std::size_t i = 0; i < img.shape().plane_size(); ++i) {
    for (std::size_t r = 0; r < 3; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        acc += (inverse ? kOpponent[c][r] : kOpponent[r][c]) * img.plane(c)[i];
      }
      out.plane(r)[i] = acc;
    }
  }
  return out;
}

std::vector<std::size_t> patch_offsets(std::size_t extent) {
  std::vector<std::size_t> offs;
  for (std::size_t o = 0; o + DctDenoiser::kPatch < extent; o += DctDenoiser::kStride) offs.push_back(o);
  offs.push_back(extent - DctDenoiser::kPatch);
  return offs;
}

// Hard-thresholds the AC coefficients of every patch; `threshold(y0, x0)`
// gives the cut-off for the patch anchored there.
template <class ThresholdFn>
Image dct_threshold(const Image& img, ThresholdFn threshold) {
  constexpr std::size_t P = DctDenoiser::kPatch;
  if (img.height() < P || img.width() < P) {
    throw ShapeError("dct denoiser: image " + to_string(img.shape()) + " is smaller than 8x8");
  }
  const Mat8& d = dct_matrix();
  const Image work = to_opponent(img, false);
  const auto ys = patch_offsets(img.height());
  const auto xs = patch_offsets(img.width());
  const std::size_t W = img.width();

  Image acc(img.shape());
  std::vector<double> count(img.shape().plane_size(), 0.0);
  for (std::size_t y0 : ys) {
    for (std::size_t x0 : xs) {
      for (std::size_t y = 0; y < P; ++y) {
        for (std::size_t x = 0; x < P; ++x) count[(y0 + y) * W + x0 + x] += 1.0;
      }
    }
  }

  Mat8 block{}, tmp{}, coef{};
  for (std::size_t y0 : ys) {
    for (std::size_t x0 : xs) {
      const double thr = threshold(y0, x0);
      for (std::size_t c = 0; c < img.channels(); ++c) {
        for (std::size_t y = 0; y < P; ++y) {
          for (std::size_t x = 0; x < P; ++x) block[y][x] = work.at(c, y0 + y, x0 + x);
        }
        if (thr > 0.0) {
          // coef = D * block * D^T
          for (std::size_t k = 0; k < P; ++k) {
            for (std::size_t x = 0; x < P; ++x) {
              double s = 0.0;
              for (std::size_t n = 0; n < P; ++n) s += d[k][n] * block[n][x];
              tmp[k][x] = s;
            }
          }
          for (std::size_t k = 0; k < P; ++k) {
            for (std::size_t l = 0; l < P; ++l) {
              double s = 0.0;
              for (std::size_t n = 0; n < P; ++n) s += tmp[k][n] * d[l][n];
              coef[k][l] = s;
            }
          }
          for (std::size_t k = 0; k < P; ++k) {
            for (std::size_t l = 0; l < P; ++l) {
              if ((k | l) != 0 && std::abs(coef[k][l]) <= thr) coef[k][l] = 0.0;
            }
          }
          // block = D^T * coef * D
          for (std::size_t n = 0; n < P; ++n) {
            for (std::size_t l = 0; l < P; ++l) {
              double s = 0.0;
              for (std::size_t k = 0; k < P; ++k) s += d[k][n] * coef[k][l];
              tmp[n][l] = s;
            }
          }
          for (std::size_t n = 0; n < P; ++n) {
            for (std::size_t m = 0; m < P; ++m) {
              double s = 0.0;
              for (std::size_t l = 0; l < P; ++l) s += tmp[n][l] * d[l][m];
              block[n][m] = s;
            }
          }
        }
        for (std::size_t y = 0; y < P; ++y) {
          for (std::size_t x = 0; x < P; ++x) acc.at(c, y0 + y, x0 + x) += block[y][x];
        }
      }
    }
  }
  for (std::size_t c = 0; c < acc.channels(); ++c) {
    auto p = acc.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] /= count[i];
  }
  return to_opponent(acc, true);
}

bool all_zero(std::span<const double> v) {
  for (double x : v) {
    if (x != 0.0) return false;
  }
  return true;
}

fs::path unique_temp_path(const std::string& stem) {
  static std::atomic<std::uint64_t> counter{0};
  return fs::temp_directory_path() /
         ("noisemorph-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + stem + ".ntf");
}

struct TempFile {
  fs::path path;
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
};

}  // namespace

Image DctDenoiser::denoise_fixed(const Image& img, double sigma) const {
  if (!(sigma >= 0.0)) throw std::invalid_argument("dct_denoise_fixed: sigma must be >= 0");
  if (sigma == 0.0) return img;
  const double thr = kThresholdFactor * sigma;
  return dct_threshold(img, [thr](std::size_t, std::size_t) { return thr; });
}

Image DctDenoiser::denoise_flexible(const Image& img, const NoiseField& sigma_map) const {
  require_same_shape(img.shape(), sigma_map.shape(), "dct_denoise_flexible");
  if (all_zero(sigma_map.samples())) return img;
  const std::size_t W = img.width();
  // Box sums of |map| over every 8x8 window via a summed-area table.
  std::vector<double> sat((img.height() + 1) * (W + 1), 0.0);
  for (std::size_t y = 0; y < img.height(); ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double v = 0.0;
      for (std::size_t c = 0; c < img.channels(); ++c) v += std::abs(sigma_map.at(c, y, x));
      sat[(y + 1) * (W + 1) + x + 1] = v + sat[y * (W + 1) + x + 1] + sat[(y + 1) * (W + 1) + x] - sat[y * (W + 1) + x];
    }
  }
  const double denom = static_cast<double>(kPatch * kPatch * img.channels());
  return dct_threshold(img, [&](std::size_t y0, std::size_t x0) {
    const std::size_t y1 = y0 + kPatch, x1 = x0 + kPatch;
    const double sum = sat[y1 * (W + 1) + x1] - sat[y0 * (W + 1) + x1] - sat[y1 * (W + 1) + x0] + sat[y0 * (W + 1) + x0];
    return kThresholdFactor * std::max(sum, 0.0) / denom;
  });
}

Image dct_denoise_fixed(const Image& img, double sigma) { return DctDenoiser{}.denoise_fixed(img, sigma); }

Image dct_denoise_flexible(const Image& img, const NoiseField& sigma_map) {
  return DctDenoiser{}.denoise_flexible(img, sigma_map);
}

ExternalDenoiser::ExternalDenoiser(Spec spec) : spec_(std::move(spec)) {}

Image ExternalDenoiser::denoise_fixed(const Image& img, double sigma) const {
  std::ostringstream s;
  s.precision(17);
  s << sigma;
  return run(img, {"--sigma", s.str()});
}

Image ExternalDenoiser::denoise_flexible(const Image& img, const NoiseField& sigma_map) const {
  require_same_shape(img.shape(), sigma_map.shape(), "external denoise_flexible");
  TempFile map{unique_temp_path("sigma-map")};
  save_image(retag<Image>(sigma_map), map.path, ImageFormat::ntf);
  return run(img, {"--sigma-map", map.path.string()});
}

Image ExternalDenoiser::run(const Image& img, const std::vector<std::string>& extra) const {
  std::unique_lock<std::mutex> lock(mutex_, std::defer_lock);
  if (!spec_.reentrant) lock.lock();

  TempFile in{unique_temp_path("in")};
  TempFile out{unique_temp_path("out")};
  save_image(img, in.path, ImageFormat::ntf);

  std::vector<std::string> argv_s{spec_.program.string()};
  argv_s.insert(argv_s.end(), spec_.args.begin(), spec_.args.end());
  argv_s.insert(argv_s.end(), extra.begin(), extra.end());
  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, in.path.c_str(), O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, out.path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, spec_.program.c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw ProtocolError(name() + ": cannot start: " + std::strerror(rc));

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw ProtocolError(name() + ": waitpid failed: " + std::strerror(errno));
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw ProtocolError(name() + ": exited with status " +
                        std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }

  std::ifstream is(out.path, std::ios::binary);
  Image result;
  try {
    result = read_ntf(is);
  } catch (const IoError& e) {
    throw ProtocolError(name() + ": bad output container: " + e.what());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw ProtocolError(name() + ": trailing bytes after container");
  if (!(result.shape() == img.shape())) {
    throw ProtocolError(name() + ": returned shape " + to_string(result.shape()) + ", expected " +
                        to_string(img.shape()));
  }
  if (!all_finite(result.samples())) throw ProtocolError(name() + ": returned non-finite samples");
  return result;
}

std::shared_ptr<Denoiser> register_external_denoiser(ExternalDenoiser::Spec spec) {
  fs::path prog = spec.program;
  if (prog.empty()) throw ProtocolError("external denoiser: empty program path");
  if (!prog.has_parent_path()) {
    const char* path_env = std::getenv("PATH");
    std::stringstream dirs(path_env ? path_env : "");
    std::string dir;
    fs::path found;
    while (std::getline(dirs, dir, ':')) {
      const fs::path candidate = fs::path(dir) / prog;
      if (!dir.empty() && ::access(candidate.c_str(), X_OK) == 0) {
        found = candidate;
        break;
      }
    }
    if (found.empty()) throw ProtocolError("external denoiser: '" + prog.string() + "' not found on PATH");
    prog = found;
  }
  if (::access(prog.c_str(), X_OK) != 0) {
    throw ProtocolError("external denoiser: '" + prog.string() + "' is missing or not executable");
  }
  spec.program = prog;
  return std::make_shared<ExternalDenoiser>(std::move(spec));
}

std::shared_ptr<Denoiser> make_denoiser(const std::string& selector) {
  if (selector.empty() || selector == "builtin") return std::make_shared<DctDenoiser>();
  constexpr std::string_view kExec = "exec:";
  if (selector.rfind(kExec, 0) == 0) {
    ExternalDenoiser::Spec spec;
    spec.program = selector.substr(kExec.size());
    return register_external_denoiser(std::move(spec));
  }
  throw std::invalid_argument("unknown denoiser '" + selector + "' (expected builtin or exec:PATH)");
}

void validate(const RefineConfig& cfg) {
  if (!(cfg.probability >= 0.0 && cfg.probability <= 1.0)) throw std::invalid_argument("refine: p must be in [0,1]");
  if (cfg.rounds < 0) throw std::invalid_argument("refine: rounds must be >= 0");
}

Image random_replacement_refine(const Image& denoised, const Image& transformed, const Denoiser& den,
                                double sigma0, const RefineConfig& cfg) {
  validate(cfg);
  require_same_shape(denoised.shape(), transformed.shape(), "random_replacement_refine");
  if (cfg.rounds == 0) return denoised;
  const std::size_t planes = denoised.channels();
  const std::size_t n = denoised.shape().plane_size();
  Image sum(denoised.shape());
  for (int round = 0; round < cfg.rounds; ++round) {
    Rng rng(cfg.rng.child(static_cast<std::uint64_t>(round)));
    Image current = denoised;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < cfg.probability) {
        for (std::size_t c = 0; c < planes; ++c) current.plane(c)[i] = transformed.plane(c)[i];
      }
    }
    const Image out = den.denoise_fixed(current, sigma0);
    require_same_shape(out.shape(), denoised.shape(), "random_replacement_refine round output");
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data()[i] += out.data()[i];
  }
  for (auto& v : sum.data()) v /= cfg.rounds;
  return sum;
}

}  // namespace noisemorph
