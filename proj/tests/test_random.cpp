#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include <votepose/geometry.hpp>
#include <votepose/random.hpp>

#include "oracles.hpp"

using namespace votepose;

TEST_CASE("engine passes mt19937_64 through unchanged") {
  Rng rng(123);
  std::mt19937_64 reference(123);
  for (int i = 0; i < 100; ++i) REQUIRE(rng.next_u64() == reference());
}

TEST_CASE("seed derivation is pinned") {
  // Frozen stream layout: changing these values silently re-shuffles
  // every simulated dataset, so a change must be deliberate.
  REQUIRE(derive_seed(42, 1, 2) == 17592914093553962002ull);
  REQUIRE(derive_seed(0, 0, 0) == 2558736989570252433ull);

  // distinct streams for distinct (a, b) under one master seed
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 30; ++a) {
    for (std::uint64_t b = 0; b < 30; ++b) {
      seen.insert(derive_seed(99, a, b));
    }
  }
  REQUIRE(seen.size() == 900);
}

TEST_CASE("uniform01 is the documented 53-bit transform") {
  Rng rng(7);
  std::mt19937_64 reference(7);
  for (int i = 0; i < 1000; ++i) {
    const double expected =
        static_cast<double>(reference() >> 11) * 0x1.0p-53;
    const double got = rng.uniform01();
    REQUIRE(got == expected);
    REQUIRE(got >= 0.0);
    REQUIRE(got < 1.0);
  }
}

TEST_CASE("uniform range and index") {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    REQUIRE(v >= -2.0);
    REQUIRE(v < 3.0);
    const std::size_t k = rng.uniform_index(7);
    REQUIRE(k < 7);
  }
  REQUIRE_THROWS_AS(rng.uniform_index(0), InvalidArgument);

  // rough uniformity over 3 buckets
  std::size_t counts[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i) ++counts[rng.uniform_index(3)];
  for (std::size_t c : counts) {
    REQUIRE(c > 9000);
    REQUIRE(c < 11000);
  }
}

TEST_CASE("normal draws exactly two uniforms, no caching") {
  Rng a(77);
  Rng b(77);
  // consume one normal from a; b consumes two raw draws; streams realign
  (void)a.normal();
  (void)b.next_u64();
  (void)b.next_u64();
  for (int i = 0; i < 10; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("normal moments") {
  Rng rng(13);
  const int n = 200000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.02);

  // scaled variant is an exact scalar multiple
  Rng x(5);
  Rng y(5);
  for (int i = 0; i < 100; ++i) REQUIRE(x.normal(2.5) == 2.5 * y.normal());
}

TEST_CASE("unit vectors are unit and isotropic") {
  Rng rng(17);
  Vec3 acc{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Vec3 u = rng.unit_vector();
    REQUIRE(std::abs(norm(u) - 1.0) < 1e-12);
    acc += u;
  }
  REQUIRE(norm(acc / static_cast<double>(n)) < 0.02);
}

TEST_CASE("random rotations are proper and uniform") {
  Rng rng(19);
  const int n = 200000;
  double angle_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const Mat3 r = random_rotation(rng);
    if (i < 200) {
      REQUIRE(orthonormality_error(r) < 1e-12);
      REQUIRE(std::abs(r.determinant() - 1.0) < 1e-12);
    }
    angle_sum += rotation_angle(r);
  }
  const double mean_angle = angle_sum / n;

  // The rotation angle of a uniform rotation has density
  // (1 - cos t)/pi on [0, pi]; its mean is pi/2 + 2/pi = 2.2074161...
  // Cross-checked against quadrature of the density.
  const double analytic = 2.207416099162478;
  const double quadrature = oracles::simpson(
      [](double t) { return t * oracles::rotation_angle_density(t); }, 0.0,
      3.14159265358979323846, 20000);
  REQUIRE(std::abs(quadrature - analytic) < 1e-10);
  // Monte Carlo standard error: std(angle) ~ 0.6, n = 2e5 -> se ~ 0.0013
  REQUIRE(std::abs(mean_angle - analytic) < 0.01);

  // density itself integrates to 1
  const double mass = oracles::simpson(oracles::rotation_angle_density, 0.0,
                                       3.14159265358979323846, 20000);
  REQUIRE(std::abs(mass - 1.0) < 1e-10);
}

TEST_CASE("random_pose respects the translation box") {
  Rng rng(29);
  const Vec3 lo{-0.2, 8.0, -1.0};
  const Vec3 hi{0.4, 9.0, -0.5};
  for (int i = 0; i < 200; ++i) {
    const Pose p = random_pose(rng, lo, hi);
    REQUIRE(satisfies_pose_invariants(p));
    REQUIRE(p.translation.x >= lo.x);
    REQUIRE(p.translation.x < hi.x);
    REQUIRE(p.translation.y >= lo.y);
    REQUIRE(p.translation.y < hi.y);
    REQUIRE(p.translation.z >= lo.z);
    REQUIRE(p.translation.z < hi.z);
  }
  REQUIRE_THROWS_AS(random_pose(rng, Vec3{1, 0, 0}, Vec3{0, 1, 1}),
                    InvalidArgument);

  // the seed-taking overload replays
  const Pose a = random_pose(std::uint64_t{321});
  const Pose b = random_pose(std::uint64_t{321});
  REQUIRE(a.rotation.m == b.rotation.m);
  REQUIRE(a.translation == b.translation);
}

TEST_CASE("identical seeds replay identical streams") {
  Rng a(1000);
  Rng b(1000);
  Rng c(1001);
  bool any_diff = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    REQUIRE(va == b.next_u64());
    any_diff = any_diff || (va != c.next_u64());
  }
  REQUIRE(any_diff);
}
