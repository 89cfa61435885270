#pragma once

#include <array>
#include <cstdint>

namespace noisemorph {

/// Identity of a random stream. Equal (seed, stream) pairs give equal
/// sequences; parallel work derives child streams instead of sharing one.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  bool operator==(const RngState&) const = default;

  /// A new, independent stream keyed by `key`.
  RngState child(std::uint64_t key) const;
};

/// xoshiro256** generator seeded through splitmix64. Owns its state; not
/// thread-safe.
class Rng {
 public:
  explicit Rng(RngState state);
  Rng(std::uint64_t seed, std::uint64_t stream) : Rng(RngState{seed, stream}) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform integer on [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  std::uint64_t poisson(double mean);

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& x);

}  // namespace noisemorph
