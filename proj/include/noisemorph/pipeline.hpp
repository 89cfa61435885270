#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "noisemorph/denoiser.hpp"
#include "noisemorph/hist_match.hpp"
#include "noisemorph/image.hpp"
#include "noisemorph/noise_synth.hpp"
#include "noisemorph/rng.hpp"
#include "noisemorph/smoothing.hpp"

namespace noisemorph {

struct StrategyFlags {
  bool local_match = false;
  bool freq_match = false;
  bool use_pd = false;
  bool use_intrapatch = false;
  int median_window = 3;
  double brightness_threshold = 0.2;
  /// PD normally travels with frequency matching; set to run it alone.
  bool allow_unpaired_pd = false;

  bool operator==(const StrategyFlags&) const = default;
};

void validate(const StrategyFlags& flags);

enum class StrategyMode { automatic, manual };

struct PipelineConfig {
  MatchConfig match;
  RtvConfig rtv;
  RefineConfig refine;
  StrategyFlags flags;
  /// automatic: flags come from select_strategy; manual: `flags` verbatim.
  StrategyMode strategy = StrategyMode::automatic;
  int iterations = 3;
  std::size_t patch = 2;          // intrapatch m
  std::size_t level_map_box = 7;  // box filter applied to |t1|
  /// Seeds every random draw of a run; the rng members of `match` and
  /// `refine` are replaced by streams derived from it.
  RngState rng{};
  std::shared_ptr<const Denoiser> denoiser = std::make_shared<DctDenoiser>();
};

void validate(const PipelineConfig& cfg);

/// One iteration of the transform/denoise cycle.
struct IterationRecord {
  int iteration = 0;
  Image s, t, d, d1, d2;
  NoiseField n1, n2;
  double ks_n1 = 0.0;
  double ks_n2 = 0.0;
  double std_n2 = 0.0;
  bool frequency_matched = false;
  bool shuffled = false;
  double seconds = 0.0;
  std::optional<double> psnr;  // against a reference, when one is supplied
};

using IterationTrace = std::vector<IterationRecord>;

struct PipelineResult {
  Image d2;
  IterationTrace trace;
};

/// Names the stage that failed.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Known kinds map to a fixed strategy; nullopt means real-world/unknown and
/// enables everything. Images darker than `threshold` never use local
/// matching. An override is returned verbatim.
StrategyFlags select_strategy(std::optional<NoiseKind> noise_kind, const Image& img,
                              const std::optional<StrategyFlags>& flags_override, double threshold = 0.2);

/// Base flags for a kind before the brightness rule.
StrategyFlags strategy_for_kind(std::optional<NoiseKind> noise_kind);

/// In automatic mode replaces the four switches of cfg.flags by
/// select_strategy's choice for `o`; the other flag fields are kept. Manual
/// mode returns cfg untouched.
PipelineConfig resolve_strategy(PipelineConfig cfg, std::optional<NoiseKind> noise_kind, const Image& o);

/// iter_index is 1-based; frequency matching only runs from iteration 2 on.
std::pair<Image, IterationRecord> run_iteration(const Image& o, const Image& s, const PipelineConfig& cfg,
                                                int iter_index);

/// Initial smoothing followed by cfg.iterations iterations, each feeding its
/// D2 back in as S.
PipelineResult run_pipeline(const Image& o, const PipelineConfig& cfg, const Image* reference = nullptr);

/// |t1| smoothed by a box filter, the level map for the flexible denoiser.
NoiseField level_map(const NoiseField& t1, std::size_t box);

// Config file: `key = value` per line, '#' comments.
PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
std::string format_pipeline_config(const PipelineConfig& cfg);

/// One JSON object per iteration (scalars only).
std::string trace_to_jsonl(const IterationTrace& trace);

}  // namespace noisemorph
