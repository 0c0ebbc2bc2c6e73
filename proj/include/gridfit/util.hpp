// Small shared helpers: deterministic seed mixing and stable number formatting.
#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace gridfit {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives a child seed from a parent seed and a stream tag. Chaining calls
// gives independent deterministic streams for population draws, per-run
// initial conditions, shuffles, etc.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag + 0x632BE59BD9B4E019ull));
}

// Fixed-format double rendering so emitted tables are byte-stable across
// invocations of the same build.
inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

inline std::string format_general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace gridfit
