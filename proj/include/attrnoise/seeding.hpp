#pragma once

#include <cstdint>

namespace attrnoise {

/// splitmix64 finalizer; decorrelates seeds derived from one base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return mix_seed(mix_seed(base) ^ salt);
}

}  // namespace attrnoise
