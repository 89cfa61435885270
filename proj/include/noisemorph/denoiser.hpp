#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "noisemorph/image.hpp"
#include "noisemorph/rng.hpp"

namespace noisemorph {

/// A Gaussian denoiser at a known level (fixed) or with a per-sample level
/// map (flexible). Implementations must preserve shape and return finite
/// samples.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Image denoise_fixed(const Image& img, double sigma) const = 0;
  virtual Image denoise_flexible(const Image& img, const NoiseField& sigma_map) const = 0;
  virtual bool supports_flexible() const = 0;
  virtual std::string name() const = 0;
};

/// Sliding 8x8 DCT hard thresholding at 2.7 sigma (stride 4, uniform
/// aggregation). Colour images are thresholded in an orthonormal opponent
/// space, so i.i.d. noise keeps its level while channel-correlated noise
/// piles up in the luminance plane.
class DctDenoiser final : public Denoiser {
 public:
  static constexpr std::size_t kPatch = 8;
  static constexpr std::size_t kStride = 4;
  static constexpr double kThresholdFactor = 2.7;

  Image denoise_fixed(const Image& img, double sigma) const override;
  /// Per patch, the threshold uses the mean of |sigma_map| over the patch
  /// (all channels).
  Image denoise_flexible(const Image& img, const NoiseField& sigma_map) const override;
  bool supports_flexible() const override { return true; }
  std::string name() const override { return "builtin-dct"; }
};

Image dct_denoise_fixed(const Image& img, double sigma);
Image dct_denoise_flexible(const Image& img, const NoiseField& sigma_map);

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs `<program> [args...] --sigma <s>` or `--sigma-map <path>` with one
/// NTF1 container on stdin and expects one NTF1 container of the same shape
/// on stdout. Calls are serialized per instance unless `reentrant`.
class ExternalDenoiser final : public Denoiser {
 public:
  struct Spec {
    std::filesystem::path program;
    std::vector<std::string> args;
    bool flexible = true;
    bool reentrant = false;
  };

  explicit ExternalDenoiser(Spec spec);

  Image denoise_fixed(const Image& img, double sigma) const override;
  Image denoise_flexible(const Image& img, const NoiseField& sigma_map) const override;
  bool supports_flexible() const override { return spec_.flexible; }
  std::string name() const override { return "exec:" + spec_.program.string(); }

 private:
  Image run(const Image& img, const std::vector<std::string>& extra) const;

  Spec spec_;
  mutable std::mutex mutex_;
};

/// Resolves the program (PATH lookup for bare names) and returns a contract
/// that shells out to it. Throws ProtocolError if the program is missing.
std::shared_ptr<Denoiser> register_external_denoiser(ExternalDenoiser::Spec spec);

/// Parses "builtin" or "exec:PATH".
std::shared_ptr<Denoiser> make_denoiser(const std::string& selector);

struct RefineConfig {
  double probability = 0.3;
  int rounds = 4;
  RngState rng{};
};

void validate(const RefineConfig& cfg);

/// Each round starts from `denoised`, swaps in the pixels of `transformed`
/// under an i.i.d. per-pixel mask (all channels together) and re-denoises at
/// sigma0. Returns the mean of the round outputs.
Image random_replacement_refine(const Image& denoised, const Image& transformed, const Denoiser& den,
                                double sigma0, const RefineConfig& cfg);

}  // namespace noisemorph
