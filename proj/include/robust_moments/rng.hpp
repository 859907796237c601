#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace robust_moments {

/// Seedable generator with a portable stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard library distributions are not portable across
/// implementations, so uniform and normal variates are derived here:
///   uniform(): top 53 bits of one engine draw, scaled to [0, 1).
///   normal():  Marsaglia polar method, caching the second variate.
/// Changing any of this changes every generated dataset.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal();

  /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t value);

/// Pure function of its arguments.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b);

}  // namespace robust_moments
