#pragma once

// Seeded permutation utilities with a platform-independent bit stream.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Standard distributions are implementation-defined, so bounded
// integers are drawn here by rejection on the raw 64-bit output instead.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace prokwo {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 20211105;

// SplitMix64 finalizer; decorrelates per-stream seeds derived from one seed.
inline constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 1));
}

// Uniform integer in [0, bound), bound > 0.
inline std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
  // Reject the top partial block so every residue is equally likely.
  const std::uint64_t limit = Engine::max() - (Engine::max() % bound + 1) % bound;
  std::uint64_t draw;
  do {
    draw = engine();
  } while (draw > limit);
  return draw % bound;
}

// Durstenfeld variant of Fisher-Yates: for i = n-1 .. 1 swap i with j ~ U[0, i].
template <typename T>
void fisher_yates(std::span<T> values, Engine& engine) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i));
    using std::swap;
    swap(values[i - 1], values[j]);
  }
}

}  // namespace prokwo
