#pragma once

#include <cstdint>
#include <string_view>

#include "pcir/tensor.hpp"

namespace pcir {

/// SplitMix64 step; used to expand seeds and derive per-stream seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for stream `stream` of a parent seed. Streams are independent for
/// distinct (seed, stream) pairs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// 64-bit FNV-1a hash, used for config digests.
std::uint64_t fnv1a(std::string_view s);

/// xoshiro256** 1.0 with SplitMix64 seeding. Uniforms use the top 53 bits and
/// normals use the Box-Muller transform, both spelled out here so that draws
/// do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Matrix normal_matrix(Index rows, Index cols);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pcir
