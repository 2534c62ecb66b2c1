#pragma once

#include <cstdint>
#include <initializer_list>

namespace mmtlab {

/// Counter-based generator: every draw is a pure function of a key tuple, so
/// results do not depend on call order or thread schedule. The mixing function
/// is the SplitMix64 finalizer applied over the key words.
class KeyedRng {
 public:
  explicit KeyedRng(std::uint64_t seed) noexcept : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t bits(std::initializer_list<std::uint64_t> key) const noexcept {
    std::uint64_t h = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
    for (std::uint64_t k : key) h = mix(h ^ mix(k + 0x9e3779b97f4a7c15ULL));
    return h;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform(std::initializer_list<std::uint64_t> key) const noexcept {
    return static_cast<double>(bits(key) >> 11) * 0x1.0p-53;
  }

  /// Uniform integer on [0, bound) by rejection; bound must be > 0.
  std::uint64_t below(std::uint64_t bound, std::uint64_t a, std::uint64_t b = 0) const noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (std::uint64_t attempt = 0;; ++attempt) {
      const std::uint64_t v = bits({a, b, attempt});
      if (v < limit) return v % bound;
    }
  }

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
};

}  // namespace mmtlab
