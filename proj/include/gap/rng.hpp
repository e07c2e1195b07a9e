#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace gap {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream keyed by (seed, ids...). Used wherever work is split
// across threads so results do not depend on scheduling.
inline Rng derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632BE59BD9B4E019ull));
  return Rng(h);
}

inline Rng derive_stream(std::uint64_t seed, std::uint64_t id) {
  return derive_stream(seed, {id});
}

// Non-deterministic seed for commands run without an explicit one.
inline std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace gap
