#pragma once

#include <cstdint>

namespace mmorph {

// Counter-based generator: draw i of stream s is a pure function of
// (seed, s, i), built from the SplitMix64 finalizer. Streams are split per
// movie index so corpora reproduce regardless of generation order.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed ^ mix(stream ^ 0x6a09e667f3bcc909ULL))) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + counter * 0xd1b54a32d192ed03ULL); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const { return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53; }

  double uniform(std::uint64_t counter, double lo, double hi) const { return lo + (hi - lo) * uniform(counter); }

 private:
  std::uint64_t key_;
};

}  // namespace mmorph
