#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "noisemorph/noise_synth.hpp"
#include "noisemorph/pipeline.hpp"

namespace noisemorph::cli {

struct BenchNoise {
  NoiseKind kind;
  double level;
  std::string label() const;
};

struct BenchJob {
  std::vector<std::string> images;  // as written in the job file
  std::filesystem::path base_dir;
  std::vector<BenchNoise> noises;
  PipelineConfig config;
  std::filesystem::path output_dir;
  bool emit_images = false;
  std::uint64_t seed = 0;
  unsigned workers = 0;  // 0: hardware concurrency
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes `text` to a sibling temp file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Relative paths inside the job resolve against the job file's directory.
BenchJob load_bench_job(const std::filesystem::path& path);

/// Runs every (image, noise) pair, writes table.tsv and report.json into the
/// output directory and prints the table. Returns the number of failed runs.
int run_bench(const BenchJob& job);

}  // namespace noisemorph::cli
