#pragma once

#include <cstdint>
#include <random>

namespace mfld {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream domains keep particle noise and replication seeds apart.
enum class StreamKind : std::uint64_t { particle = 1, replication = 2 };

/// Seed of stream `index` under `root`:
///   splitmix64(splitmix64(root ^ kind) + index).
/// Particle i always draws from stream i, so its noise path does not depend
/// on N or on how particles are scheduled.
inline constexpr std::uint64_t derive_seed(std::uint64_t root, StreamKind kind, std::uint64_t index) {
  return splitmix64(splitmix64(root ^ (static_cast<std::uint64_t>(kind) * 0xD1B54A32D192ED03ULL)) + index);
}

using Engine = std::mt19937_64;

inline Engine particle_engine(std::uint64_t root, std::uint64_t particle) {
  return Engine(derive_seed(root, StreamKind::particle, particle));
}

}  // namespace mfld
