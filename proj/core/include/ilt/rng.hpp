#pragma once

#include <cstdint>
#include <random>

namespace ilt {

/// Seeded pseudo-random source used everywhere in the pipeline.
///
/// Wraps std::mt19937_64. Conversions to uniform reals and bounded integers
/// are done here from raw engine output, so the same seed yields the same
/// draws regardless of which standard library supplies the distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in the open interval (0, 1).
  double uniform();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal (Box-Muller, no cached second value).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with stream coordinates (e.g. example id, step, side)
/// into an independent 64-bit seed. Order of arguments matters.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// FNV-1a over bytes; used for config hashes and hash-based splits.
std::uint64_t fnv1a(const void* data, std::size_t size,
                    std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace ilt
