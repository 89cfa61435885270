#include "noisemorph/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"

#include "noisemorph/metrics.hpp"
#include "noisemorph/shuffle.hpp"
#include "noisemorph/texture.hpp"

namespace noisemorph {

namespace {

// Per-iteration random streams.
enum Stage : std::uint64_t { kStabilizer = 1, kMatch = 2, kIntrapatch = 3, kRefine = 4 };

RngState stage_rng(const PipelineConfig& cfg, int iter, Stage stage) {
  return cfg.rng.child(static_cast<std::uint64_t>(iter)).child(stage);
}

template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

template <class R>
void check_shape(const char* name, const R& r, const Shape& expected) {
  if (!(r.shape() == expected)) {
    throw PipelineError(name, "output shape " + to_string(r.shape()) + " differs from input " + to_string(expected));
  }
}

}  // namespace

void validate(const StrategyFlags& flags) {
  if (flags.median_window < 1 || flags.median_window % 2 == 0) {
    throw std::invalid_argument("strategy: median_window must be odd and positive");
  }
  if (flags.use_pd && !flags.freq_match && !flags.allow_unpaired_pd) {
    throw std::invalid_argument("strategy: use_pd without freq_match needs allow_unpaired_pd");
  }
}

void validate(const PipelineConfig& cfg) {
  validate(cfg.match);
  validate(cfg.rtv);
  validate(cfg.refine);
  validate(cfg.flags);
  if (cfg.iterations < 1) throw std::invalid_argument("pipeline: iterations must be >= 1");
  if (cfg.patch < 1) throw std::invalid_argument("pipeline: patch must be >= 1");
  if (cfg.level_map_box < 1 || cfg.level_map_box % 2 == 0) {
    throw std::invalid_argument("pipeline: level_map_box must be odd and positive");
  }
  if (!cfg.denoiser) throw std::invalid_argument("pipeline: no denoiser");
}

StrategyFlags strategy_for_kind(std::optional<NoiseKind> noise_kind) {
  StrategyFlags f;
  if (!noise_kind) {
    f.local_match = f.freq_match = f.use_pd = f.use_intrapatch = true;
    return f;
  }
  switch (*noise_kind) {
    case NoiseKind::gaussian:
    case NoiseKind::uniform:
    case NoiseKind::salt_pepper:
    case NoiseKind::impulse:
    case NoiseKind::bernoulli:
      break;
    case NoiseKind::poisson:
    case NoiseKind::speckle:
      f.local_match = true;
      break;
    case NoiseKind::circular_pattern:
    case NoiseKind::stripe:
    case NoiseKind::grid:
      f.freq_match = f.use_pd = true;
      break;
    case NoiseKind::channel_replicated_gaussian:
      f.use_intrapatch = true;
      break;
  }
  return f;
}

StrategyFlags select_strategy(std::optional<NoiseKind> noise_kind, const Image& img,
                              const std::optional<StrategyFlags>& flags_override, double threshold) {
  if (flags_override) return *flags_override;
  StrategyFlags f = strategy_for_kind(noise_kind);
  f.brightness_threshold = threshold;
  if (mean_brightness(img) < threshold) f.local_match = false;
  return f;
}

PipelineConfig resolve_strategy(PipelineConfig cfg, std::optional<NoiseKind> noise_kind, const Image& o) {
  if (cfg.strategy == StrategyMode::manual) return cfg;
  const StrategyFlags chosen = select_strategy(noise_kind, o, std::nullopt, cfg.flags.brightness_threshold);
  cfg.flags.local_match = chosen.local_match;
  cfg.flags.freq_match = chosen.freq_match;
  cfg.flags.use_pd = chosen.use_pd;
  cfg.flags.use_intrapatch = chosen.use_intrapatch;
  return cfg;
}

NoiseField level_map(const NoiseField& t1, std::size_t box) {
  const long r = static_cast<long>(box / 2);
  const auto H = static_cast<long>(t1.height()), W = static_cast<long>(t1.width());
  NoiseField out(t1.shape());
  std::vector<double> tmp(t1.shape().plane_size());
  const double norm = 1.0 / static_cast<double>(box);
  for (std::size_t c = 0; c < t1.channels(); ++c) {
    const auto src = t1.plane(c);
    auto dst = out.plane(c);
    for (long y = 0; y < H; ++y) {
      for (long x = 0; x < W; ++x) {
        double acc = 0.0;
        for (long d = -r; d <= r; ++d) acc += std::abs(src[y * W + std::clamp(x + d, 0L, W - 1)]);
        tmp[y * W + x] = acc * norm;
      }
    }
    for (long y = 0; y < H; ++y) {
      for (long x = 0; x < W; ++x) {
        double acc = 0.0;
        for (long d = -r; d <= r; ++d) acc += tmp[std::clamp(y + d, 0L, H - 1) * W + x];
        dst[y * W + x] = acc * norm;
      }
    }
  }
  return out;
}

std::pair<Image, IterationRecord> run_iteration(const Image& o, const Image& s, const PipelineConfig& cfg,
                                                int iter_index) {
  require_same_shape(o.shape(), s.shape(), "run_iteration");
  const auto start = std::chrono::steady_clock::now();
  const Shape shape = o.shape();
  const StrategyFlags& flags = cfg.flags;
  const Denoiser& den = *cfg.denoiser;
  const double sigma0 = cfg.match.sigma0;

  IterationRecord rec;
  rec.iteration = iter_index;
  rec.s = s;

  const NoiseField n1_hat = residual(o, s);
  rec.n1 = stage("stabilizer", [&] {
    return add_stabilizer_noise(n1_hat, cfg.match.stabilizer_sigma, stage_rng(cfg, iter_index, kStabilizer));
  });

  MatchConfig match = cfg.match;
  match.rng = stage_rng(cfg, iter_index, kMatch);
  rec.n2 = stage(flags.local_match ? "local_hist_match" : "global_hist_match", [&] {
    return flags.local_match ? local_hist_match(rec.n1, match) : global_hist_match(rec.n1, match);
  });
  if (flags.freq_match && iter_index > 1) {
    rec.n2 = stage("frequency_hist_match", [&] { return frequency_hist_match(rec.n2, match); });
    rec.frequency_matched = true;
  }
  check_shape("hist_match", rec.n2, shape);
  rec.t = assemble_transformed(s, rec.n2);

  // Shuffle, denoise at sigma0, restore.
  const bool intrapatch = flags.use_intrapatch && shape.channels == 3;
  Image work = rec.t;
  std::optional<ShuffleRecord> perm, pd;
  if (intrapatch) {
    auto [shuffled, r] = stage("intrapatch_permute", [&] {
      return intrapatch_permute(work, cfg.patch, stage_rng(cfg, iter_index, kIntrapatch));
    });
    work = std::move(shuffled);
    perm = std::move(r);
  }
  if (flags.use_pd) {
    auto [down, r] = stage("pd_down", [&] { return pd_down(work); });
    work = std::move(down);
    pd = std::move(r);
  }
  Image d = stage("denoise_fixed", [&] { return den.denoise_fixed(work, sigma0); });
  check_shape("denoise_fixed", d, work.shape());
  if (pd) d = stage("pd_up", [&] { return pd_up(d, *pd); });
  if (perm) d = stage("intrapatch_restore", [&] { return intrapatch_restore(d, *perm); });
  rec.shuffled = perm.has_value() || pd.has_value();
  if (rec.shuffled) {
    RefineConfig refine = cfg.refine;
    refine.rng = stage_rng(cfg, iter_index, kRefine);
    d = stage("refine", [&] { return random_replacement_refine(d, rec.t, den, sigma0, refine); });
  }
  check_shape("restore", d, shape);
  rec.d = std::move(d);

  auto tex = stage("texture_transform", [&] { return texture_transform(rec.d, s, rec.n1, rec.n2); });
  rec.d1 = std::move(tex.d1);
  const NoiseField map = level_map(tex.t1, cfg.level_map_box);
  Image d2 = stage("denoise_flexible", [&] {
    return den.supports_flexible() ? den.denoise_flexible(rec.d1, map) : den.denoise_fixed(rec.d1, mean(map.samples()));
  });
  check_shape("denoise_flexible", d2, shape);
  rec.d2 = d2;

  rec.ks_n1 = ks_statistic(rec.n1.samples(), sigma0);
  rec.ks_n2 = ks_statistic(rec.n2.samples(), sigma0);
  rec.std_n2 = stddev(rec.n2.samples());
  rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(d2), std::move(rec)};
}

PipelineResult run_pipeline(const Image& o, const PipelineConfig& cfg, const Image* reference) {
  validate(cfg);
  if (o.height() < 8 || o.width() < 8) throw PipelineError("input", "image must be at least 8x8");
  if (!all_finite(o.samples())) throw PipelineError("input", "image has non-finite samples");
  if (reference) require_same_shape(o.shape(), reference->shape(), "run_pipeline reference");

  const auto start = std::chrono::steady_clock::now();
  const SmoothResult initial =
      stage("estimate_initial_noise", [&] { return estimate_initial_noise(o, cfg.rtv, cfg.flags.median_window); });
  const double smoothing_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  PipelineResult result;
  Image s = initial.smoothed;
  for (int it = 1; it <= cfg.iterations; ++it) {
    auto [d2, rec] = run_iteration(o, s, cfg, it);
    if (it == 1) rec.seconds += smoothing_seconds;
    if (reference) rec.psnr = psnr(d2, *reference);
    result.trace.push_back(std::move(rec));
    s = std::move(d2);
  }
  result.d2 = std::move(s);
  return result;
}

// ---------------------------------------------------------------------------
// Config file

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  // "15/255" style fractions are accepted for convenience.
  const auto slash = v.find('/');
  if (slash != std::string::npos) {
    return to_double(key, trim(v.substr(0, slash))) / to_double(key, trim(v.substr(slash + 1)));
  }
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const long long i = to_int(key, v);
  if (i < 0) throw std::invalid_argument("config: " + key + " must be non-negative");
  return static_cast<std::size_t>(i);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"sigma0", [](auto& c, auto& k, auto& v) { c.match.sigma0 = to_double(k, v); }},
      {"bins", [](auto& c, auto& k, auto& v) { c.match.bins = to_size(k, v); }},
      {"stabilizer_sigma", [](auto& c, auto& k, auto& v) { c.match.stabilizer_sigma = to_double(k, v); }},
      {"block", [](auto& c, auto& k, auto& v) { c.match.block = to_size(k, v); }},
      {"overlap", [](auto& c, auto& k, auto& v) { c.match.overlap = to_size(k, v); }},
      {"rtv_alpha", [](auto& c, auto& k, auto& v) { c.rtv.alpha = to_double(k, v); }},
      {"rtv_sigma", [](auto& c, auto& k, auto& v) { c.rtv.sigma_g = to_double(k, v); }},
      {"rtv_iterations", [](auto& c, auto& k, auto& v) { c.rtv.iterations = static_cast<int>(to_int(k, v)); }},
      {"rtv_epsilon_w", [](auto& c, auto& k, auto& v) { c.rtv.epsilon_w = to_double(k, v); }},
      {"rtv_epsilon_v", [](auto& c, auto& k, auto& v) { c.rtv.epsilon_v = to_double(k, v); }},
      {"rtv_window_radius", [](auto& c, auto& k, auto& v) { c.rtv.window_radius = static_cast<int>(to_int(k, v)); }},
      {"solver_tol", [](auto& c, auto& k, auto& v) { c.rtv.solver_tol = to_double(k, v); }},
      {"solver_max_iter", [](auto& c, auto& k, auto& v) { c.rtv.solver_max_iter = static_cast<int>(to_int(k, v)); }},
      {"refine_p", [](auto& c, auto& k, auto& v) { c.refine.probability = to_double(k, v); }},
      {"refine_rounds", [](auto& c, auto& k, auto& v) { c.refine.rounds = static_cast<int>(to_int(k, v)); }},
      {"iterations", [](auto& c, auto& k, auto& v) { c.iterations = static_cast<int>(to_int(k, v)); }},
      {"patch", [](auto& c, auto& k, auto& v) { c.patch = to_size(k, v); }},
      {"level_map_box", [](auto& c, auto& k, auto& v) { c.level_map_box = to_size(k, v); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.rng.seed = static_cast<std::uint64_t>(to_int(k, v)); }},
      {"strategy",
       [](auto& c, auto& k, auto& v) {
         if (v == "auto") {
           c.strategy = StrategyMode::automatic;
         } else if (v == "manual") {
           c.strategy = StrategyMode::manual;
         } else {
           throw std::invalid_argument("config: " + k + " must be auto or manual");
         }
       }},
      {"local_match", [](auto& c, auto& k, auto& v) { c.flags.local_match = to_bool(k, v); }},
      {"freq_match", [](auto& c, auto& k, auto& v) { c.flags.freq_match = to_bool(k, v); }},
      {"use_pd", [](auto& c, auto& k, auto& v) { c.flags.use_pd = to_bool(k, v); }},
      {"use_intrapatch", [](auto& c, auto& k, auto& v) { c.flags.use_intrapatch = to_bool(k, v); }},
      {"allow_unpaired_pd", [](auto& c, auto& k, auto& v) { c.flags.allow_unpaired_pd = to_bool(k, v); }},
      {"median_window", [](auto& c, auto& k, auto& v) { c.flags.median_window = static_cast<int>(to_int(k, v)); }},
      {"brightness_threshold", [](auto& c, auto& k, auto& v) { c.flags.brightness_threshold = to_double(k, v); }},
      {"denoiser", [](auto& c, auto&, auto& v) { c.denoiser = make_denoiser(v); }},
  };
  return table;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& text) {
  PipelineConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    it->second(cfg, key, value);
  }
  validate(cfg);
  return cfg;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path.string() + ": cannot open config");
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_pipeline_config(buf.str());
}

std::string format_pipeline_config(const PipelineConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "sigma0 = " << cfg.match.sigma0 << '\n'
     << "bins = " << cfg.match.bins << '\n'
     << "stabilizer_sigma = " << cfg.match.stabilizer_sigma << '\n'
     << "block = " << cfg.match.block << '\n'
     << "overlap = " << cfg.match.overlap << '\n'
     << "rtv_alpha = " << cfg.rtv.alpha << '\n'
     << "rtv_sigma = " << cfg.rtv.sigma_g << '\n'
     << "rtv_iterations = " << cfg.rtv.iterations << '\n'
     << "rtv_epsilon_w = " << cfg.rtv.epsilon_w << '\n'
     << "rtv_epsilon_v = " << cfg.rtv.epsilon_v << '\n'
     << "rtv_window_radius = " << cfg.rtv.window_radius << '\n'
     << "solver_tol = " << cfg.rtv.solver_tol << '\n'
     << "solver_max_iter = " << cfg.rtv.solver_max_iter << '\n'
     << "refine_p = " << cfg.refine.probability << '\n'
     << "refine_rounds = " << cfg.refine.rounds << '\n'
     << "iterations = " << cfg.iterations << '\n'
     << "patch = " << cfg.patch << '\n'
     << "level_map_box = " << cfg.level_map_box << '\n'
     << "seed = " << cfg.rng.seed << '\n'
     << "strategy = " << (cfg.strategy == StrategyMode::manual ? "manual" : "auto") << '\n'
     << "local_match = " << b(cfg.flags.local_match) << '\n'
     << "freq_match = " << b(cfg.flags.freq_match) << '\n'
     << "use_pd = " << b(cfg.flags.use_pd) << '\n'
     << "use_intrapatch = " << b(cfg.flags.use_intrapatch) << '\n'
     << "allow_unpaired_pd = " << b(cfg.flags.allow_unpaired_pd) << '\n'
     << "median_window = " << cfg.flags.median_window << '\n'
     << "brightness_threshold = " << cfg.flags.brightness_threshold << '\n';
  return os.str();
}

std::string trace_to_jsonl(const IterationTrace& trace) {
  std::string out;
  for (const auto& rec : trace) {
    nlohmann::ordered_json j;
    j["iteration"] = rec.iteration;
    j["ks_n1"] = rec.ks_n1;
    j["ks_n2"] = rec.ks_n2;
    j["std_n2"] = rec.std_n2;
    j["frequency_matched"] = rec.frequency_matched;
    j["shuffled"] = rec.shuffled;
    j["seconds"] = rec.seconds;
    if (rec.psnr) {
      j["psnr"] = std::isfinite(*rec.psnr) ? nlohmann::ordered_json(*rec.psnr) : nlohmann::ordered_json(nullptr);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace noisemorph
