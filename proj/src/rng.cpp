#include "emodub/rng.h"

#include <cmath>
#include <numbers>

namespace emodub {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

SplitMix64 SplitMix64::keyed(std::uint64_t seed, std::string_view key, std::uint64_t tag) {
  const std::uint64_t s0 = mix64(seed ^ fnv1a64(key));
  return SplitMix64(mix64(s0 + kGolden * (tag + 1)));
}

double SplitMix64::normal() {
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  // Largest multiple of bound that fits; draws at or above it are rejected.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % bound;
}

}  // namespace emodub
