#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace slicebench {

// splitmix64; used to derive independent sub-seeds from one root seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable seed derivation: mix the root with a tag sequence so that e.g.
// (seed, epoch, tuple, trial) streams never collide or depend on call order.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(root);
  for (std::uint64_t t : tags) {
    h = splitmix64(h ^ (t + 0x9e3779b97f4a7c15ULL));
  }
  return h;
}

inline std::mt19937_64 make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> tags = {}) {
  return std::mt19937_64(derive_seed(root, tags));
}

}  // namespace slicebench
