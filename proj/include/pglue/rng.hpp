// Seeded random numbers with fully specified arithmetic.
//
// std::mt19937_64 output is pinned by the standard, but the standard
// distributions are not; generation here goes through explicit conversions
// so identical seeds yield identical streams on any platform.

#ifndef PGLUE_RNG_HPP
#define PGLUE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace pglue {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no internal caching, fixed draw order).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Multiply-shift; bias is negligible for the small n used here.
    const unsigned __int128 wide = static_cast<unsigned __int128>(engine_()) * n;
    return static_cast<std::uint64_t>(wide >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 step; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Deterministic per-purpose stream seed (e.g. one stream per object).
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t purpose) {
  return mix_seed(mix_seed(base ^ 0xA0761D6478BD642Full) ^ mix_seed(stream * 0x9E3779B97F4A7C15ull + purpose));
}

}  // namespace pglue

#endif  // PGLUE_RNG_HPP
