// Python bindings. Images cross the boundary as float64 arrays of shape
// (H, W) or (H, W, C); the library stores them channel-planar.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "noisemorph/denoiser.hpp"
#include "noisemorph/image_io.hpp"
#include "noisemorph/metrics.hpp"
#include "noisemorph/noise_synth.hpp"
#include "noisemorph/pipeline.hpp"

namespace py = pybind11;
namespace nm = noisemorph;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

nm::Image to_image(const Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
  const auto h = static_cast<std::size_t>(a.shape(0));
  const auto w = static_cast<std::size_t>(a.shape(1));
  const auto c = a.ndim() == 3 ? static_cast<std::size_t>(a.shape(2)) : 1;
  nm::Image img(h, w, c);
  const double* src = a.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) img.at(ch, y, x) = src[(y * w + x) * c + ch];
    }
  }
  return img;
}

template <class Tag>
Array to_array(const nm::Raster<Tag>& img) {
  const std::size_t h = img.height(), w = img.width(), c = img.channels();
  Array out = c == 1 ? Array({h, w}) : Array({h, w, c});
  double* dst = out.mutable_data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) dst[(y * w + x) * c + ch] = img.at(ch, y, x);
    }
  }
  return out;
}

std::optional<nm::NoiseKind> kind_arg(const std::optional<std::string>& name) {
  if (!name || name->empty() || *name == "unknown") return std::nullopt;
  auto kind = nm::parse_noise_kind(*name);
  if (!kind) throw py::value_error("unknown noise kind '" + *name + "'");
  return kind;
}

py::dict trace_record(const nm::IterationRecord& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["ks_n1"] = r.ks_n1;
  d["ks_n2"] = r.ks_n2;
  d["std_n2"] = r.std_n2;
  d["frequency_matched"] = r.frequency_matched;
  d["shuffled"] = r.shuffled;
  d["seconds"] = r.seconds;
  d["psnr"] = r.psnr ? py::cast(*r.psnr) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_noisemorph, m) {
  m.doc() = "Noise distribution transformation for out-of-distribution denoising";

  m.def("load_image", [](const std::string& path) { return to_array(nm::load_image(path)); }, py::arg("path"));
  m.def(
      "save_image", [](const Array& img, const std::string& path) { nm::save_image(to_image(img), path); },
      py::arg("img"), py::arg("path"));

  m.def(
      "apply_noise",
      [](const Array& clean, const std::string& kind, double level, std::uint64_t seed) {
        const auto k = kind_arg(kind);
        if (!k) throw py::value_error("a noise kind is required");
        return to_array(nm::apply_noise(to_image(clean), nm::NoiseSpec{*k, level, nm::RngState{seed, 0}}));
      },
      py::arg("clean"), py::arg("kind"), py::arg("level"), py::arg("seed") = 0,
      "Adds synthetic noise; level is sigma in 8-bit units, a density or a photon scale depending on kind.");

  m.def(
      "select_strategy",
      [](const std::optional<std::string>& kind, const Array& img, double threshold) {
        const auto f = nm::select_strategy(kind_arg(kind), to_image(img), std::nullopt, threshold);
        py::dict d;
        d["local_match"] = f.local_match;
        d["freq_match"] = f.freq_match;
        d["use_pd"] = f.use_pd;
        d["use_intrapatch"] = f.use_intrapatch;
        return d;
      },
      py::arg("kind"), py::arg("img"), py::arg("threshold") = 0.2);

  m.def(
      "denoise",
      [](const Array& noisy, const std::optional<std::string>& kind, const std::string& config,
         std::optional<Array> clean) {
        const nm::Image o = to_image(noisy);
        std::optional<nm::Image> ref;
        if (clean) ref = to_image(*clean);
        nm::PipelineConfig cfg = nm::resolve_strategy(nm::parse_pipeline_config(config), kind_arg(kind), o);
        nm::PipelineResult res;
        {
          py::gil_scoped_release release;
          res = nm::run_pipeline(o, cfg, ref ? &*ref : nullptr);
        }
        py::list trace;
        for (const auto& r : res.trace) trace.append(trace_record(r));
        return py::make_tuple(to_array(res.d2), trace);
      },
      py::arg("noisy"), py::arg("kind") = py::none(), py::arg("config") = "", py::arg("clean") = py::none(),
      "Runs the transform/denoise pipeline. `config` uses the `key = value` config syntax. Returns (denoised, "
      "trace).");

  m.def(
      "dct_denoise",
      [](const Array& img, double sigma) { return to_array(nm::dct_denoise_fixed(to_image(img), sigma)); },
      py::arg("img"), py::arg("sigma"));

  m.def(
      "psnr", [](const Array& a, const Array& b, double peak) { return nm::psnr(to_image(a), to_image(b), peak); },
      py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  m.def(
      "ssim", [](const Array& a, const Array& b, double peak) { return nm::ssim(to_image(a), to_image(b), peak); },
      py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  m.def(
      "ks_statistic",
      [](const Array& samples, double sigma0) {
        return nm::ks_statistic(std::span<const double>(samples.data(), static_cast<std::size_t>(samples.size())),
                                sigma0);
      },
      py::arg("samples"), py::arg("sigma0"));
  m.def(
      "spectral_flatness",
      [](const Array& n) { return nm::spectral_flatness(nm::retag<nm::NoiseField>(to_image(n))); }, py::arg("n"));

  py::register_exception<nm::PipelineError>(m, "PipelineError", PyExc_RuntimeError);
  py::register_exception<nm::IoError>(m, "IoError", PyExc_OSError);
}
