#pragma once

#include <cmath>
#include <cstdint>

namespace cogflow {

// Counter-based generator: output i is a pure function of (stream key, i),
// so any draw can be computed without generating its predecessors and the
// same particle produces the same sequence regardless of worker count.

namespace detail {

inline constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ull;

inline uint64_t mix64(uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdull;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ull;
  z ^= z >> 33;
  return z;
}

inline uint64_t derive_key(uint64_t master, uint64_t particle, uint64_t stream_tag) {
  uint64_t k = mix64(master + kGamma);
  k = mix64(k ^ mix64((particle + 1) * kGamma));
  k = mix64(k ^ mix64((stream_tag + 0x51) * 0xbf58476d1ce4e5b9ull));
  return k;
}

}  // namespace detail

/// One splittable stream; draws are indexed by an explicit counter.
struct CounterStream {
  uint64_t key = 0;
  uint64_t counter = 0;

  uint64_t next_u64() { return detail::mix64(key + (++counter) * detail::kGamma); }

  /// Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Exponential with rate lambda > 0.
  double next_exponential(double lambda) {
    return -std::log1p(-next_unit()) / lambda;
  }

  /// Standard normal (Box-Muller, two uniforms per draw).
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }
};

/// Paired per-particle streams: jump epochs draw from the time stream only,
/// spatial draws (initial position, jump targets) from the space stream only.
struct RngStreams {
  CounterStream time_stream;
  CounterStream space_stream;

  static RngStreams for_particle(uint64_t master_seed, uint64_t particle_index) {
    RngStreams s;
    s.time_stream.key = detail::derive_key(master_seed, particle_index, 0);
    s.space_stream.key = detail::derive_key(master_seed, particle_index, 1);
    return s;
  }
};

}  // namespace cogflow
