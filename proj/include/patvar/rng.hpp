#pragma once

#include <cstdint>

namespace patvar {

// SplitMix64 finaliser, used to derive independent seeds and per-sample keys
// from a master seed. Not a general-purpose generator.
struct SplitMix64 {
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

// Seed for stream `index` under `master`; a pure function of both.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return SplitMix64::mix(SplitMix64::mix(master) ^ SplitMix64::mix(index ^ 0x5851f42d4c957f2dULL));
}

}  // namespace patvar
