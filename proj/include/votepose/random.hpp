#pragma once

// Seeded randomness with reproducibility guarantees. All draws go through
// an mt19937_64 wrapped with hand-rolled uniform/normal transforms instead
// of std distributions, because the standard leaves distribution output
// implementation-defined and these streams must replay bit-identically.
// Parallel work never shares a stream: derive_seed() gives every
// (frame, instance) or (sweep cell, trial) its own independent engine, so
// results cannot depend on thread count or scheduling.

#include <cstdint>
#include <random>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"

namespace votepose {

namespace detail {

// SplitMix64 finalizer; good avalanche, cheap, stable.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Deterministic sub-stream seed for stream (a, b) under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b = 0) {
  return detail::mix64(detail::mix64(detail::mix64(master) ^ a) ^ b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1), 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// Uniform index in [0, n). Lemire multiply-shift; no modulo bias.
  std::size_t uniform_index(std::size_t n) {
    if (n == 0) throw InvalidArgument("uniform_index needs n >= 1");
    using u128 = unsigned __int128;
    return static_cast<std::size_t>(
        (static_cast<u128>(next_u64()) * static_cast<u128>(n)) >> 64);
  }

  /// Standard normal via Box-Muller. Draws exactly two uniforms per call
  /// (no spare caching) so the stream position stays easy to reason about.
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1]
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double sigma) { return sigma * normal(); }

  Vec3 gaussian_vec3(double sigma) {
    return {normal(sigma), normal(sigma), normal(sigma)};
  }

  /// Uniform direction on the unit sphere.
  Vec3 unit_vector() {
    for (;;) {
      Vec3 g{normal(), normal(), normal()};
      double n = norm(g);
      if (n > 1e-12) return g / n;
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// Rotation drawn uniformly from SO(3) (random unit quaternion).
inline Mat3 random_rotation(Rng& rng) {
  double w, x, y, z, n2;
  do {
    w = rng.normal();
    x = rng.normal();
    y = rng.normal();
    z = rng.normal();
    n2 = w * w + x * x + y * y + z * z;
  } while (n2 < 1e-24);
  double inv = 1.0 / std::sqrt(n2);
  w *= inv;
  x *= inv;
  y *= inv;
  z *= inv;
  Mat3 r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  return r;
}

/// Pose with rotation uniform over SO(3) and translation uniform per
/// component inside [lo, hi].
inline Pose random_pose(Rng& rng, const Vec3& lo = {-1.0, -1.0, -1.0},
                        const Vec3& hi = {1.0, 1.0, 1.0}) {
  if (!(lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z)) {
    throw InvalidArgument("random_pose translation box is inverted");
  }
  Pose p;
  p.rotation = random_rotation(rng);
  p.translation = {rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y),
                   rng.uniform(lo.z, hi.z)};
  return p;
}

inline Pose random_pose(std::uint64_t seed, const Vec3& lo = {-1.0, -1.0, -1.0},
                        const Vec3& hi = {1.0, 1.0, 1.0}) {
  Rng rng(seed);
  return random_pose(rng, lo, hi);
}

}  // namespace votepose
