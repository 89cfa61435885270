#include "bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "noisemorph/image_io.hpp"
#include "noisemorph/metrics.hpp"

namespace noisemorph::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string BenchNoise::label() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s@%g", std::string(to_string(kind)).c_str(), level);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw IoError(tmp.string() + ": cannot open for writing");
    os << text;
    os.flush();
    if (!os) throw IoError(tmp.string() + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError(path.string() + ": " + ec.message());
  }
}

namespace {

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    std::ostringstream os;
    os.precision(17);
    os << v.get<double>();
    return os.str();
  }
  throw UsageError("job: config values must be scalars");
}

}  // namespace

BenchJob load_bench_job(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError(path.string() + ": cannot open job file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("job: top level must be an object");

  BenchJob job;
  job.base_dir = path.parent_path();
  try {
    for (const auto& img : j.value("images", nlohmann::json::array())) job.images.push_back(img.get<std::string>());
    for (const auto& n : j.value("noise", nlohmann::json::array())) {
      const auto name = n.at("kind").get<std::string>();
      const auto kind = parse_noise_kind(name);
      if (!kind) throw UsageError("job: unknown noise kind '" + name + "'");
      job.noises.push_back({*kind, n.at("level").get<double>()});
    }
    if (j.contains("config")) {
      const auto& c = j["config"];
      if (c.is_string()) {
        fs::path p = c.get<std::string>();
        job.config = load_pipeline_config(p.is_absolute() ? p : job.base_dir / p);
      } else if (c.is_object()) {
        std::string text;
        for (const auto& [k, v] : c.items()) text += k + " = " + scalar_text(v) + "\n";
        job.config = parse_pipeline_config(text);
      } else {
        throw UsageError("job: config must be a path or an object");
      }
    }
    fs::path out = j.value("output_dir", std::string("bench_out"));
    job.output_dir = out.is_absolute() ? out : job.base_dir / out;
    job.emit_images = j.value("emit_images", false);
    job.seed = j.value("seed", job.config.rng.seed);
    job.workers = j.value("workers", 0u);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("job: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (job.images.empty()) throw UsageError("job: image set is empty");
  if (job.noises.empty()) throw UsageError("job: no noise specs");
  for (const auto& n : job.noises) {
    try {
      validate(NoiseSpec{n.kind, n.level, {}});
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("job: ") + e.what());
    }
  }
  return job;
}

namespace {

struct RunResult {
  std::string image;
  std::size_t image_index = 0;
  std::size_t noise_index = 0;
  BenchNoise noise{};
  StrategyFlags flags;
  std::optional<std::string> error;
  double noisy_psnr = 0, noisy_ssim = 0;
  double direct_psnr = 0, direct_ssim = 0;
  double pipeline_psnr = 0, pipeline_ssim = 0;
  std::vector<double> ks_n2;
};

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

void run_one(const BenchJob& job, RunResult& r) {
  const fs::path p = fs::path(r.image).is_absolute() ? fs::path(r.image) : job.base_dir / r.image;
  const Image clean = load_image(p);
  const RngState base = RngState{job.seed, 0}.child(r.image_index).child(r.noise_index);
  const Image noisy = apply_noise(clean, NoiseSpec{r.noise.kind, r.noise.level, base.child(0)});

  PipelineConfig cfg = resolve_strategy(job.config, r.noise.kind, noisy);
  cfg.rng = base.child(1);
  r.flags = cfg.flags;
  const Image direct = cfg.denoiser->denoise_fixed(noisy, cfg.match.sigma0);
  const PipelineResult res = run_pipeline(noisy, cfg, &clean);

  r.noisy_psnr = psnr(noisy, clean);
  r.noisy_ssim = ssim(noisy, clean);
  r.direct_psnr = psnr(direct, clean);
  r.direct_ssim = ssim(direct, clean);
  r.pipeline_psnr = psnr(res.d2, clean);
  r.pipeline_ssim = ssim(res.d2, clean);
  for (const auto& rec : res.trace) r.ks_n2.push_back(rec.ks_n2);

  if (job.emit_images) {
    const fs::path dir = job.output_dir / "images";
    fs::create_directories(dir);
    std::string key = p.stem().string() + "_" + std::string(to_string(r.noise.kind)) + "_";
    char lvl[32];
    std::snprintf(lvl, sizeof lvl, "%g", r.noise.level);
    key += lvl;
    save_image(noisy, dir / (key + "_noisy.png"));
    save_image(direct, dir / (key + "_direct.png"));
    save_image(res.d2, dir / (key + "_pipeline.png"));
  }
}

ordered_json flags_json(const StrategyFlags& f) {
  return {{"local_match", f.local_match},
          {"freq_match", f.freq_match},
          {"use_pd", f.use_pd},
          {"use_intrapatch", f.use_intrapatch}};
}

}  // namespace

int run_bench(const BenchJob& job) {
  std::vector<RunResult> runs;
  for (std::size_t i = 0; i < job.images.size(); ++i) {
    for (std::size_t k = 0; k < job.noises.size(); ++k) {
      RunResult r;
      r.image = job.images[i];
      r.image_index = i;
      r.noise_index = k;
      r.noise = job.noises[k];
      runs.push_back(std::move(r));
    }
  }
  std::stable_sort(runs.begin(), runs.end(), [](const RunResult& a, const RunResult& b) {
    return std::tie(a.image, a.noise_index) < std::tie(b.image, b.noise_index);
  });

  fs::create_directories(job.output_dir);
  unsigned workers = job.workers ? job.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(runs.size()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      try {
        run_one(job, runs[i]);
      } catch (const std::exception& e) {
        runs[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Aggregate by noise spec, mean over the images that succeeded.
  struct Row {
    std::size_t n = 0;
    double v[6] = {0, 0, 0, 0, 0, 0};
  };
  std::map<std::string, Row> rows;
  int failed = 0;
  ordered_json report_runs = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json rec;
    rec["image"] = r.image;
    rec["noise"] = std::string(to_string(r.noise.kind));
    rec["level"] = r.noise.level;
    if (r.error) {
      ++failed;
      rec["status"] = "failed";
      rec["error"] = *r.error;
    } else {
      rec["status"] = "ok";
      rec["flags"] = flags_json(r.flags);
      rec["noisy"] = {{"psnr", number(r.noisy_psnr)}, {"ssim", r.noisy_ssim}};
      rec["direct"] = {{"psnr", number(r.direct_psnr)}, {"ssim", r.direct_ssim}};
      rec["pipeline"] = {{"psnr", number(r.pipeline_psnr)}, {"ssim", r.pipeline_ssim}};
      rec["ks_n2"] = r.ks_n2;
      Row& row = rows[r.noise.label()];
      const double vals[6] = {r.noisy_psnr, r.noisy_ssim, r.direct_psnr, r.direct_ssim, r.pipeline_psnr, r.pipeline_ssim};
      for (int c = 0; c < 6; ++c) row.v[c] += vals[c];
      ++row.n;
    }
    report_runs.push_back(std::move(rec));
  }
  for (const auto& n : job.noises) rows.try_emplace(n.label());

  std::ostringstream table;
  table << "noise\timages\tnoisy_psnr\tnoisy_ssim\tdirect_psnr\tdirect_ssim\tpipeline_psnr\tpipeline_ssim\n";
  ordered_json summary = ordered_json::array();
  for (const auto& [label, row] : rows) {
    table << label << '\t' << row.n;
    ordered_json s;
    s["noise"] = label;
    s["images"] = row.n;
    static constexpr const char* kNames[6] = {"noisy_psnr", "noisy_ssim", "direct_psnr",
                                              "direct_ssim", "pipeline_psnr", "pipeline_ssim"};
    for (int c = 0; c < 6; ++c) {
      const double m = row.n ? row.v[c] / static_cast<double>(row.n) : std::nan("");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", m);
      table << '\t' << buf;
      s[kNames[c]] = number(m);
    }
    table << '\n';
    summary.push_back(std::move(s));
  }

  ordered_json report;
  report["seed"] = job.seed;
  report["sigma0"] = job.config.match.sigma0;
  report["iterations"] = job.config.iterations;
  report["denoiser"] = job.config.denoiser->name();
  report["failed"] = failed;
  report["summary"] = std::move(summary);
  report["runs"] = std::move(report_runs);

  write_text_atomic(job.output_dir / "table.tsv", table.str());
  write_text_atomic(job.output_dir / "report.json", report.dump(2) + "\n");
  std::cout << table.str();
  for (const auto& r : runs) {
    if (r.error) std::cerr << "failed: " << r.image << " " << r.noise.label() << ": " << *r.error << '\n';
  }
  return failed;
}

}  // namespace noisemorph::cli
