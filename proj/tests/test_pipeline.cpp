#include <cmath>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "noisemorph/metrics.hpp"
#include "noisemorph/pipeline.hpp"

using namespace noisemorph;

namespace {

Image smooth_image(std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        img.at(ch, y, x) = 0.5 + 0.25 * std::sin(0.2 * static_cast<double>(x)) * std::cos(0.15 * static_cast<double>(y + ch));
      }
    }
  }
  return img;
}

// Returns a fixed clean image whatever it is given.
class OracleDenoiser final : public Denoiser {
 public:
  explicit OracleDenoiser(Image clean) : clean_(std::move(clean)) {}
  Image denoise_fixed(const Image& img, double) const override { return img.shape() == clean_.shape() ? clean_ : img; }
  Image denoise_flexible(const Image&, const NoiseField&) const override { return clean_; }
  bool supports_flexible() const override { return true; }
  std::string name() const override { return "oracle"; }

 private:
  Image clean_;
};

class FixedOnly final : public Denoiser {
 public:
  Image denoise_fixed(const Image& img, double sigma) const override { return dct_denoise_fixed(img, sigma); }
  Image denoise_flexible(const Image&, const NoiseField&) const override { throw std::logic_error("not flexible"); }
  bool supports_flexible() const override { return false; }
  std::string name() const override { return "fixed-only"; }
};

class Broken final : public Denoiser {
 public:
  Image denoise_fixed(const Image&, double) const override { return Image(3, 3, 1); }
  Image denoise_flexible(const Image& img, const NoiseField&) const override { return img; }
  bool supports_flexible() const override { return true; }
  std::string name() const override { return "broken"; }
};

PipelineConfig manual(bool local, bool freq, bool pd, bool intra) {
  PipelineConfig cfg;
  cfg.strategy = StrategyMode::manual;
  cfg.flags.local_match = local;
  cfg.flags.freq_match = freq;
  cfg.flags.use_pd = pd;
  cfg.flags.use_intrapatch = intra;
  cfg.rng = RngState{17, 0};
  return cfg;
}

}  // namespace

TEST_CASE("strategy table") {
  using K = NoiseKind;
  const auto flags = [](std::optional<K> k) {
    const auto f = strategy_for_kind(k);
    return std::array<bool, 4>{f.local_match, f.freq_match, f.use_pd, f.use_intrapatch};
  };
  using A = std::array<bool, 4>;
  for (K k : {K::gaussian, K::uniform, K::salt_pepper, K::impulse, K::bernoulli}) CHECK(flags(k) == A{0, 0, 0, 0});
  for (K k : {K::poisson, K::speckle}) CHECK(flags(k) == A{1, 0, 0, 0});
  for (K k : {K::circular_pattern, K::stripe, K::grid}) CHECK(flags(k) == A{0, 1, 1, 0});
  CHECK(flags(K::channel_replicated_gaussian) == A{0, 0, 0, 1});
  CHECK(flags(std::nullopt) == A{1, 1, 1, 1});
}

TEST_CASE("brightness threshold and override") {
  const Image bright(16, 16, 3, 0.6), dark(16, 16, 3, 0.1);
  const auto p = select_strategy(NoiseKind::poisson, bright, std::nullopt);
  CHECK(p.local_match);
  CHECK_FALSE((p.freq_match || p.use_pd || p.use_intrapatch));
  CHECK_FALSE(select_strategy(NoiseKind::poisson, dark, std::nullopt).local_match);

  const auto u = select_strategy(std::nullopt, dark, std::nullopt, 0.2);
  CHECK_FALSE(u.local_match);
  CHECK((u.freq_match && u.use_pd && u.use_intrapatch));
  CHECK(select_strategy(std::nullopt, Image(16, 16, 3, 0.25), std::nullopt, 0.3).local_match == false);
  CHECK(select_strategy(std::nullopt, Image(16, 16, 3, 0.25), std::nullopt, 0.2).local_match == true);

  StrategyFlags forced;
  forced.local_match = true;
  forced.median_window = 5;
  CHECK(select_strategy(NoiseKind::gaussian, dark, forced) == forced);
}

TEST_CASE("resolve strategy") {
  PipelineConfig cfg;
  cfg.flags.median_window = 5;
  const auto r = resolve_strategy(cfg, NoiseKind::stripe, Image(16, 16, 1, 0.5));
  CHECK((r.flags.freq_match && r.flags.use_pd));
  CHECK(r.flags.median_window == 5);
  PipelineConfig m = manual(true, false, false, false);
  CHECK(resolve_strategy(m, NoiseKind::stripe, Image(16, 16, 1, 0.5)).flags == m.flags);
}

TEST_CASE("flag validation") {
  StrategyFlags f;
  f.use_pd = true;
  CHECK_THROWS_AS(validate(f), std::invalid_argument);
  f.allow_unpaired_pd = true;
  CHECK_NOTHROW(validate(f));
  f.median_window = 4;
  CHECK_THROWS_AS(validate(f), std::invalid_argument);
}

TEST_CASE("level map is a box filter of |t1|") {
  NoiseField t(5, 5, 1);
  t.at(0, 2, 2) = -9.0;
  const NoiseField m = level_map(t, 3);
  CHECK(m.at(0, 2, 2) == doctest::Approx(1.0));
  CHECK(m.at(0, 1, 1) == doctest::Approx(1.0));
  CHECK(m.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(level_map(t, 1).at(0, 2, 2) == 9.0);
}

TEST_CASE("zero-noise constant input survives the loop") {
  const Image o(32, 32, 3, 0.5);
  const PipelineResult r = run_pipeline(o, manual(false, false, false, false));
  REQUIRE(r.trace.size() == 3);
  CHECK(r.d2.shape() == o.shape());
  double se = 0;
  for (std::size_t i = 0; i < o.size(); ++i) se += (r.d2.data()[i] - 0.5) * (r.d2.data()[i] - 0.5);
  CHECK(std::sqrt(se / static_cast<double>(o.size())) < 2 * 0.01);
}

TEST_CASE("oracle denoiser gives the clean image") {
  const Image clean = smooth_image(32, 32, 3);
  const Image o = apply_noise(clean, NoiseSpec{NoiseKind::salt_pepper, 0.1, RngState{1, 0}});
  PipelineConfig cfg = manual(false, false, false, false);
  cfg.denoiser = std::make_shared<OracleDenoiser>(clean);
  CHECK(run_pipeline(o, cfg).d2 == clean);
}

TEST_CASE("transformed noise follows the target") {
  const Image clean = smooth_image(64, 64, 3);
  const Image o = apply_noise(clean, NoiseSpec{NoiseKind::salt_pepper, 0.2, RngState{2, 0}});
  PipelineConfig cfg = manual(false, false, false, false);
  cfg.iterations = 1;
  const PipelineResult r = run_pipeline(o, cfg);
  const auto& rec = r.trace.front();
  CHECK(rec.ks_n2 < rec.ks_n1);
  CHECK(std::abs(rec.std_n2 - cfg.match.sigma0) < 0.15 * cfg.match.sigma0);
  CHECK(psnr(r.d2, clean) > psnr(o, clean));
}

TEST_CASE("one iteration equals smoothing then run_iteration") {
  const Image clean = smooth_image(32, 32, 3);
  const Image o = apply_noise(clean, NoiseSpec{NoiseKind::gaussian, 20.0, RngState{3, 0}});
  PipelineConfig cfg = manual(false, true, true, true);
  cfg.iterations = 1;
  const PipelineResult r = run_pipeline(o, cfg);
  const SmoothResult s = estimate_initial_noise(o, cfg.rtv, cfg.flags.median_window);
  CHECK(run_iteration(o, s.smoothed, cfg, 1).first == r.d2);
  CHECK_FALSE(r.trace[0].frequency_matched);
  CHECK(r.trace[0].shuffled);
}

TEST_CASE("frequency matching starts at iteration 2 and runs are deterministic") {
  const Image clean = smooth_image(32, 32, 3);
  const Image o = apply_noise(clean, NoiseSpec{NoiseKind::circular_pattern, 25.0, RngState{4, 0}});
  PipelineConfig cfg = manual(false, true, true, false);
  cfg.iterations = 2;
  const PipelineResult a = run_pipeline(o, cfg, &clean);
  const PipelineResult b = run_pipeline(o, cfg, &clean);
  CHECK(a.d2 == b.d2);
  CHECK_FALSE(a.trace[0].frequency_matched);
  CHECK(a.trace[1].frequency_matched);
  REQUIRE(a.trace[1].psnr.has_value());
  CHECK(*a.trace[1].psnr == psnr(a.d2, clean));
  for (const auto& rec : a.trace) {
    for (const Image* im : {&rec.s, &rec.t, &rec.d, &rec.d1, &rec.d2}) CHECK(im->shape() == o.shape());
  }
  cfg.rng = RngState{18, 0};
  CHECK_FALSE(run_pipeline(o, cfg).d2 == a.d2);
}

TEST_CASE("grayscale input skips intrapatch") {
  const Image clean = smooth_image(24, 24, 1);
  const Image o = apply_noise(clean, NoiseSpec{NoiseKind::gaussian, 15.0, RngState{5, 0}});
  PipelineConfig cfg = manual(false, false, false, true);
  cfg.iterations = 1;
  CHECK_FALSE(run_pipeline(o, cfg).trace[0].shuffled);
}

TEST_CASE("fixed-only backend runs at the mean level") {
  const Image clean = smooth_image(24, 24, 3);
  const Image o = apply_noise(clean, NoiseSpec{NoiseKind::gaussian, 15.0, RngState{6, 0}});
  PipelineConfig cfg = manual(false, false, false, false);
  cfg.iterations = 1;
  cfg.denoiser = std::make_shared<FixedOnly>();
  CHECK_NOTHROW(run_pipeline(o, cfg));
}

TEST_CASE("stage failures name the stage") {
  PipelineConfig cfg = manual(false, false, false, false);
  cfg.denoiser = std::make_shared<Broken>();
  try {
    run_pipeline(smooth_image(16, 16, 1), cfg);
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "denoise_fixed");
  }
  CHECK_THROWS_AS(run_pipeline(Image(4, 16, 1), manual(false, false, false, false)), PipelineError);
  Image bad(16, 16, 1, 0.5);
  bad.data()[3] = std::nan("");
  CHECK_THROWS_AS(run_pipeline(bad, manual(false, false, false, false)), PipelineError);
}

TEST_CASE("config parsing") {
  const PipelineConfig cfg = parse_pipeline_config(
      "# comment\n"
      "sigma0 = 15/255\n"
      "iterations = 2   # trailing\n"
      "strategy = manual\n"
      "use_pd = true\nfreq_match = true\n"
      "seed = 99\n"
      "\n");
  CHECK(cfg.match.sigma0 == doctest::Approx(15.0 / 255.0));
  CHECK(cfg.iterations == 2);
  CHECK(cfg.strategy == StrategyMode::manual);
  CHECK((cfg.flags.use_pd && cfg.flags.freq_match));
  CHECK(cfg.rng.seed == 99);
  CHECK_THROWS_AS(parse_pipeline_config("bogus = 1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_pipeline_config("iterations\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_pipeline_config("iterations = 0\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_pipeline_config("bins = many\n"), std::invalid_argument);
}

TEST_CASE("config round-trips through its text form") {
  PipelineConfig cfg;
  cfg.match.sigma0 = 0.0712345678901234;
  cfg.match.block = 40;
  cfg.rtv.alpha = 0.02;
  cfg.refine.rounds = 2;
  cfg.flags.local_match = true;
  cfg.flags.brightness_threshold = 0.3;
  cfg.strategy = StrategyMode::manual;
  cfg.rng.seed = 1234;
  const PipelineConfig back = parse_pipeline_config(format_pipeline_config(cfg));
  CHECK(back.match.sigma0 == cfg.match.sigma0);
  CHECK(back.match.block == 40);
  CHECK(back.rtv.alpha == cfg.rtv.alpha);
  CHECK(back.refine.rounds == 2);
  CHECK(back.flags == cfg.flags);
  CHECK(back.strategy == StrategyMode::manual);
  CHECK(back.rng.seed == 1234);
  CHECK(format_pipeline_config(back) == format_pipeline_config(cfg));
}

TEST_CASE("trace export has one object per iteration") {
  const Image clean = smooth_image(24, 24, 1);
  const Image o = apply_noise(clean, NoiseSpec{NoiseKind::gaussian, 15.0, RngState{7, 0}});
  PipelineConfig cfg = manual(false, false, false, false);
  cfg.iterations = 2;
  const PipelineResult r = run_pipeline(o, cfg, &clean);
  std::istringstream is(trace_to_jsonl(r.trace));
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    ++n;
    CHECK(j["iteration"] == n);
    CHECK(j["psnr"].is_number());
    CHECK(j.contains("ks_n2"));
  }
  CHECK(n == 2);
}
