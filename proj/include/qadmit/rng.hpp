#pragma once

#include <cstdint>

namespace qadmit {

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter, lane), so replications are reproducible no matter
/// in which order or on which thread they run.
///
/// The mixing function is the SplitMix64 finalizer applied to a chained
/// combination of the four keys; doubles take the top 53 bits.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : seed_(seed), stream_(stream) {}

  [[nodiscard]] constexpr std::uint64_t bits(std::uint64_t counter, std::uint64_t lane) const noexcept {
    std::uint64_t h = mix(seed_ ^ 0x243f6a8885a308d3ULL);
    h = mix(h ^ (stream_ + 0x13198a2e03707344ULL));
    h = mix(h ^ (counter + 0xa4093822299f31d0ULL));
    return mix(h ^ (lane + 0x082efa98ec4e6c89ULL));
  }

  /// Uniform on [0, 1).
  [[nodiscard]] constexpr double uniform(std::uint64_t counter, std::uint64_t lane) const noexcept {
    return static_cast<double>(bits(counter, lane) >> 11) * 0x1.0p-53;
  }

  [[nodiscard]] constexpr std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] constexpr std::uint64_t stream() const noexcept { return stream_; }

 private:
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace qadmit
