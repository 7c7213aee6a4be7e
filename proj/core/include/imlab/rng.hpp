#pragma once

#include <cstdint>

namespace imlab {

/// Splittable counter-based generator: draw i of a stream is a pure function
/// of (seed, i), so shots can be evaluated in any order or in parallel and
/// still reproduce the same record. The mixer is splitmix64.
struct CounterRng {
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Raw 64-bit draw at position `counter` of the stream keyed by `seed`.
  static std::uint64_t at(std::uint64_t seed, std::uint64_t counter) {
    return mix(seed + (counter + 1) * kGamma);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  static double uniform(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(at(seed, counter) >> 11) * 0x1.0p-53;
  }

  /// Derived seed for sub-stream `index` (sweep trials, parallel lanes).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
    return mix(seed ^ mix(index + 0x632be59bd9b4e019ull));
  }
};

}  // namespace imlab
