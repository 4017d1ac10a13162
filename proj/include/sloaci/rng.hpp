#pragma once

#include <cstdint>
#include <random>

namespace sloaci {

using Rng = std::mt19937_64;

/// Stream purposes within one replication. Units and assignments come from
/// separate streams so that every design sees the same arrivals for a given
/// replication index.
enum class StreamPurpose : std::uint64_t { units = 1, assignment = 2, auxiliary = 3 };

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based derivation: the stream depends only on (master, index,
/// purpose), never on which worker runs the replication or when.
inline Rng derive_stream(std::uint64_t master, std::uint64_t index, StreamPurpose purpose) {
  const std::uint64_t a = splitmix64(master);
  const std::uint64_t b = splitmix64(a ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  const std::uint64_t c = splitmix64(b ^ static_cast<std::uint64_t>(purpose));
  std::seed_seq seq{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

}  // namespace sloaci
