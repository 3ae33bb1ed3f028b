#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace shapkit {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Folds a root seed and a list of stream coordinates into one 64-bit seed.
/// Distinct coordinates give statistically independent engines.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(root);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return s;
}

/// Named sub-streams so one component can be ablated without perturbing another.
enum class Stream : std::uint64_t { kEnv = 1, kSampling = 2, kNegotiation = 3, kPolicy = 4 };

inline std::mt19937_64 make_engine(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  return std::mt19937_64(derive_seed(root, path));
}

}  // namespace shapkit
