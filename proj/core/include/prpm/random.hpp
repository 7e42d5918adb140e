#pragma once

#include <cstdint>
#include <random>

namespace prpm {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the index-th independent stream derived from a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t master,
                                    std::uint64_t index) noexcept {
  return mix_seed(master ^ mix_seed(index + 0x632BE59BD9B4E019ULL));
}

}  // namespace prpm
