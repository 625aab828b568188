#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace lgg {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche, cheap.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Counter-based seed derivation: one root seed fans out to independent
// streams keyed by (purpose, indices), so fold-level parallelism cannot
// perturb which stream a fold consumes.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> salts) {
  std::uint64_t h = mix64(root);
  for (std::uint64_t s : salts) h = mix64(h ^ mix64(s + 0x9e3779b97f4a7c15ull));
  return h;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> salts) {
  return Rng(derive_seed(root, salts));
}

}  // namespace lgg
