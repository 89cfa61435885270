#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace noisemorph {

/// Unnormalized 2-D DFT of a real row-major plane.
std::vector<std::complex<double>> fft2(std::span<const double> plane, std::size_t height, std::size_t width);

/// Normalized inverse 2-D DFT (divides by height * width).
std::vector<std::complex<double>> ifft2(std::span<const std::complex<double>> spectrum, std::size_t height,
                                        std::size_t width);

}  // namespace noisemorph
