#pragma once

#include <random>
#include <string_view>

#include "p3ls/types.hpp"

namespace p3ls::rng {

/// Derives an independent stream seed from a master seed and a purpose label,
/// so that each protocol phase / key draws from its own reproducible stream.
inline Seed derive(Seed master, std::string_view purpose) {
  // FNV-1a over the label, then a splitmix64 finalizer mixing in the master.
  std::uint64_t h = 14695981039346656037ull;
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  std::uint64_t z = h + master * 0x9e3779b97f4a7c15ull + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::mt19937_64 engine(Seed seed) { return std::mt19937_64(seed); }

inline Matrix gaussian(Index rows, Index cols, Seed seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out(i, j) = dist(gen);
  return out;
}

}  // namespace p3ls::rng
