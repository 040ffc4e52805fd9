#include <doctest.h>

#include <cmath>
#include <set>

#include "eslab/rng.hpp"

using namespace eslab;

TEST_CASE("same counter gives identical draws") {
  const NormalPair a = normal_pair(42, RngStream::Langevin, 7, 123);
  const NormalPair b = normal_pair(42, RngStream::Langevin, 7, 123);
  CHECK(a.z0 == b.z0);
  CHECK(a.z1 == b.z1);
}

TEST_CASE("distinct counters, streams, and seeds give distinct draws") {
  const double base = uniform01(1, RngStream::Langevin, 0, 0);
  CHECK(uniform01(1, RngStream::Langevin, 0, 1) != base);
  CHECK(uniform01(1, RngStream::Langevin, 1, 0) != base);
  CHECK(uniform01(1, RngStream::GaussianSampling, 0, 0) != base);
  CHECK(uniform01(2, RngStream::Langevin, 0, 0) != base);
}

TEST_CASE("uniforms stay strictly inside (0, 1)") {
  for (std::uint64_t i = 0; i < 20000; ++i) {
    const UniformPair u = uniform_pair(9, RngStream::TestProbes, i, 0);
    CHECK(u.u0 > 0.0);
    CHECK(u.u0 < 1.0);
    CHECK(u.u1 > 0.0);
    CHECK(u.u1 < 1.0);
  }
}

TEST_CASE("normal draws have the right first moments") {
  const long n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < n; i += 2) {
    const NormalPair z = normal_pair(3, RngStream::TestProbes, static_cast<std::uint64_t>(i), 0);
    sum += z.z0 + z.z1;
    sum_sq += z.z0 * z.z0 + z.z1 * z.z1;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("uniform mean matches a fair coin") {
  const long n = 100000;
  double sum = 0.0;
  for (long i = 0; i < n; ++i) {
    sum += uniform01(17, RngStream::TestProbes, static_cast<std::uint64_t>(i), 1);
  }
  CHECK(std::abs(sum / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}
