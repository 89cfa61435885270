// noisemorph command-line front end.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "bench.hpp"
#include "noisemorph/image_io.hpp"
#include "noisemorph/metrics.hpp"
#include "noisemorph/noise_synth.hpp"
#include "noisemorph/pipeline.hpp"

namespace nm = noisemorph;
namespace fs = std::filesystem;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

std::string db(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::optional<nm::NoiseKind> kind_or_throw(const std::string& name) {
  if (name.empty() || name == "unknown") return std::nullopt;
  auto kind = nm::parse_noise_kind(name);
  if (!kind) throw nm::cli::UsageError("unknown noise kind '" + name + "'");
  return kind;
}

struct NoisegenArgs {
  std::string in, out, kind;
  double level = 25.0;
  std::uint64_t seed = 0;
};

int cmd_noisegen(const NoisegenArgs& a) {
  const auto kind = kind_or_throw(a.kind);
  if (!kind) throw nm::cli::UsageError("--kind must name a noise kind");
  nm::NoiseSpec spec{*kind, a.level, nm::RngState{a.seed, 0}};
  try {
    nm::validate(spec);
  } catch (const std::invalid_argument& e) {
    throw nm::cli::UsageError(e.what());
  }
  const nm::Image clean = nm::load_image(a.in);
  const nm::Image noisy = nm::apply_noise(clean, spec);
  nm::save_image(noisy, a.out);
  std::cout << "psnr " << db(nm::psnr(noisy, clean)) << " dB\n";
  return 0;
}

struct DenoiseArgs {
  std::string in, out, config, kind, clean, trace, denoiser;
};

int cmd_denoise(const DenoiseArgs& a) {
  const auto kind = kind_or_throw(a.kind);
  nm::PipelineConfig cfg = a.config.empty() ? nm::PipelineConfig{} : nm::load_pipeline_config(a.config);
  if (!a.denoiser.empty()) cfg.denoiser = nm::make_denoiser(a.denoiser);

  const nm::Image noisy = nm::load_image(a.in);
  std::optional<nm::Image> clean;
  if (!a.clean.empty()) clean = nm::load_image(a.clean);
  cfg = nm::resolve_strategy(std::move(cfg), kind, noisy);

  nm::PipelineResult res;
  try {
    res = nm::run_pipeline(noisy, cfg, clean ? &*clean : nullptr);
  } catch (const nm::PipelineError& e) {
    std::cerr << "noisemorph: pipeline failed at stage " << e.stage() << ": " << e.what() << '\n';
    return kRuntimeFailure;
  }
  nm::save_image(res.d2, a.out);
  if (!a.trace.empty()) nm::cli::write_text_atomic(a.trace, nm::trace_to_jsonl(res.trace));
  if (clean) {
    std::cout << "noisy    psnr " << db(nm::psnr(noisy, *clean)) << " dB  ssim " << nm::ssim(noisy, *clean) << '\n'
              << "denoised psnr " << db(nm::psnr(res.d2, *clean)) << " dB  ssim " << nm::ssim(res.d2, *clean)
              << '\n';
  }
  return 0;
}

int cmd_bench(const std::string& job_path) {
  const nm::cli::BenchJob job = nm::cli::load_bench_job(job_path);
  return nm::cli::run_bench(job) == 0 ? 0 : kRuntimeFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise distribution transformation and denoising"};
  app.require_subcommand(1);

  NoisegenArgs gen;
  auto* noisegen = app.add_subcommand("noisegen", "Add synthetic noise to an image");
  noisegen->add_option("--in", gen.in, "Clean input image")->required();
  noisegen->add_option("--kind", gen.kind, "Noise kind")->required();
  noisegen->add_option("--level", gen.level, "Noise level (sigma in 8-bit units, density, ...)")->required();
  noisegen->add_option("--seed", gen.seed, "RNG seed");
  noisegen->add_option("--out", gen.out, "Output image")->required();

  DenoiseArgs den;
  auto* denoise = app.add_subcommand("denoise", "Run the transform/denoise pipeline");
  denoise->add_option("--in", den.in, "Noisy input image")->required();
  denoise->add_option("--config", den.config, "Pipeline config file");
  denoise->add_option("--noise-kind", den.kind, "Declared noise kind (default: unknown)");
  denoise->add_option("--clean", den.clean, "Clean reference for PSNR/SSIM");
  denoise->add_option("--trace", den.trace, "Write a JSON-lines iteration trace");
  denoise->add_option("--denoiser", den.denoiser, "builtin or exec:PATH");
  denoise->add_option("--out", den.out, "Output image")->required();

  std::string job_path;
  auto* bench = app.add_subcommand("bench", "Run a benchmark grid");
  bench->add_option("--job", job_path, "Job description (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*noisegen) return cmd_noisegen(gen);
    if (*denoise) return cmd_denoise(den);
    if (*bench) return cmd_bench(job_path);
  } catch (const nm::cli::UsageError& e) {
    std::cerr << "noisemorph: " << e.what() << '\n';
    std::cerr << app.get_subcommands().front()->help();
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "noisemorph: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kUsageError;
}
