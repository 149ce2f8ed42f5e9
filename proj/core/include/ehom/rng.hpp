#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ehom {

/// SplitMix64 finaliser: a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based hash of a seed and a list of integer keys. Used wherever a
/// random value must depend only on its coordinates, never on call order.
constexpr std::uint64_t counter_hash(std::uint64_t seed,
                                     std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t k : keys) {
    h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  }
  return h;
}

/// Maps 64 random bits to a double in the open interval (0, 1).
constexpr double unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

using Engine = std::mt19937_64;

/// Independent engine for stream `stream` of a master seed.
inline Engine make_stream(std::uint64_t master_seed, std::uint64_t stream) {
  std::seed_seq seq{counter_hash(master_seed, {stream, 0}), counter_hash(master_seed, {stream, 1}),
                    counter_hash(master_seed, {stream, 2}), counter_hash(master_seed, {stream, 3})};
  return Engine(seq);
}

inline double uniform_open(Engine& engine) { return unit_open(engine()); }

} // namespace ehom
