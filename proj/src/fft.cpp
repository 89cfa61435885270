#include "noisemorph/fft.hpp"

#include <fftw3.h>

#include <memory>
#include <mutex>
#include <stdexcept>

namespace noisemorph {

namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

std::vector<std::complex<double>> transform(std::vector<std::complex<double>> data, std::size_t height,
                                            std::size_t width, int sign) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  Plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), buf, buf, sign, FFTW_ESTIMATE));
  }
  if (!plan) throw std::runtime_error("fft: FFTW failed to create a plan");
  fftw_execute(plan.get());
  return data;
}

}  // namespace

std::vector<std::complex<double>> fft2(std::span<const double> plane, std::size_t height, std::size_t width) {
  if (plane.size() != height * width) throw std::invalid_argument("fft2: size mismatch");
  std::vector<std::complex<double>> data(plane.begin(), plane.end());
  return transform(std::move(data), height, width, FFTW_FORWARD);
}

std::vector<std::complex<double>> ifft2(std::span<const std::complex<double>> spectrum, std::size_t height,
                                        std::size_t width) {
  if (spectrum.size() != height * width) throw std::invalid_argument("ifft2: size mismatch");
  auto out = transform({spectrum.begin(), spectrum.end()}, height, width, FFTW_BACKWARD);
  const double scale = 1.0 / static_cast<double>(height * width);
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace noisemorph
