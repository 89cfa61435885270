#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "noisemorph/image.hpp"

namespace noisemorph {

/// Relative-total-variation smoothing parameters. The defaults are the
/// published settings (alpha, sigma, iterations) plus the stabilizers and
/// solver controls that the method leaves open.
struct RtvConfig {
  double alpha = 0.015;
  double sigma_g = 3.0;
  int iterations = 4;
  double epsilon_w = 1e-3;
  double epsilon_v = 1e-3;
  int window_radius = 6;
  double solver_tol = 1e-6;
  int solver_max_iter = 2000;
};

void validate(const RtvConfig& cfg);

struct WeightTag {};
/// Per-pixel smoothness weights, one raster per gradient direction.
using WeightField = Raster<WeightTag>;

struct RtvWeights {
  WeightField horizontal;
  WeightField vertical;
};

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct SmoothResult {
  Image smoothed;       // S
  NoiseField residual;  // O - S
};

/// Per-channel square median with edge replication. window must be odd;
/// window 1 is the identity.
Image median_filter(const Image& img, int window);

/// Forward differences; the last column (horizontal) or row (vertical) is 0.
WeightField gradient_horizontal(const Image& img);
WeightField gradient_vertical(const Image& img);

/// W(x) = 1 / (|(G * grad)(x)| + eps_w) with a normalized truncated Gaussian
/// G, then divided by (|grad(x)| + eps_v). Computed per direction and per
/// channel.
RtvWeights rtv_weights(const Image& img, const RtvConfig& cfg);

/// Solves (I + alpha * D^T diag(w) D) s = o per channel with modified incomplete-Cholesky
/// preconditioned conjugate gradients. Throws SolverError when the relative
/// residual does not reach cfg.solver_tol within cfg.solver_max_iter.
Image rtv_solve(const Image& obs, const RtvWeights& weights, const RtvConfig& cfg, SolveStats* stats = nullptr);

/// Applies A = I + alpha * D^T diag(w) D to one channel of `s`.
void rtv_apply_operator(std::span<const double> s, std::span<const double> wh, std::span<const double> wv,
                        std::size_t height, std::size_t width, double alpha, std::span<double> out);

/// ||s - o||^2 + alpha * sum(w * (D s)^2), summed over channels.
double rtv_objective(const Image& s, const Image& obs, const RtvWeights& weights, double alpha);

/// cfg.iterations rounds of weights-then-solve, re-deriving the weights from
/// the current estimate each round.
Image rtv_smooth(const Image& img, const RtvConfig& cfg);

/// Median prefilter, RTV smoothing, and the residual against the unfiltered
/// input.
SmoothResult estimate_initial_noise(const Image& img, const RtvConfig& cfg, int median_window = 3);

}  // namespace noisemorph
