#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace ncdp {

/// SplitMix64. Shared by transmitter and receiver models to expand a
/// terminal seed into its per-slot coefficients, so its output sequence is
/// part of the interoperability contract and must not change.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) from the top 53 bits.
  constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

inline constexpr const char* kCoefficientGenerator = "splitmix64";

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a master seed and a path of
/// indices (sweep point, trial, ...). Never depends on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
  SplitMix64 mix(master);
  std::uint64_t s = mix();
  for (std::uint64_t v : {a, b, c}) {
    SplitMix64 step(s ^ (v * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
    s = step();
  }
  return s;
}

inline Rng make_stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) {
  return Rng(derive_seed(master, a, b, c));
}

}  // namespace ncdp
