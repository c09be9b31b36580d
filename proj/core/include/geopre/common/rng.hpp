#pragma once

#include <cstdint>
#include <random>

namespace geopre {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a parent seed and a tag/index
/// pair. Used so that per-sample work is a pure function of (seed, index).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag, std::uint64_t index = 0) {
  return splitmix64(splitmix64(parent ^ splitmix64(tag)) + index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

// Stream tags.
namespace tag {
inline constexpr std::uint64_t geometry = 0x67656f;
inline constexpr std::uint64_t grf = 0x677266;
inline constexpr std::uint64_t mesh = 0x6d657368;
inline constexpr std::uint64_t occ_rand = 0x6f636372;
inline constexpr std::uint64_t occ_pert = 0x6f636370;
inline constexpr std::uint64_t physics_query = 0x70687971;
inline constexpr std::uint64_t batch = 0x6261;
inline constexpr std::uint64_t init = 0x696e6974;
inline constexpr std::uint64_t shuffle = 0x7368;
inline constexpr std::uint64_t latent_noise = 0x6c6e;
inline constexpr std::uint64_t test_split = 0x74657374;
inline constexpr std::uint64_t retry = 0x7274;
}  // namespace tag

}  // namespace geopre
