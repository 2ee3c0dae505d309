#pragma once

#include <cstdint>
#include <string_view>

namespace emodub {

// SplitMix64 (Steele, Lea, Flood 2014). Every random quantity in the project
// comes from this generator so results are identical across platforms and
// standard libraries.
//
//   next():   state += 0x9E3779B97F4A7C15; return mix64(state)
//   mix64(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//             z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//             return z ^ (z >> 31)
//
// Keyed streams: keyed(seed, key, tag) starts from
//   s0 = mix64(seed ^ fnv1a64(key))
//   s1 = mix64(s0 + 0x9E3779B97F4A7C15 * (tag + 1))
// where fnv1a64 is 64-bit FNV-1a over the key bytes.
//
// Derived draws:
//   uniform01()  = (next() >> 11) * 2^-53          in [0, 1)
//   uniform_pm1() = 2 * uniform01() - 1             in [-1, 1)
//   normal()     = Box-Muller on two uniform01 draws (the first mapped to
//                  (0, 1] as 1 - u), cosine branch only; no caching
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static SplitMix64 keyed(std::uint64_t seed, std::string_view key, std::uint64_t tag);

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += kGolden;
    return mix64(state_);
  }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform_pm1() { return 2.0 * uniform01() - 1.0; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();

  // Unbiased integer in [0, bound) by rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace emodub
