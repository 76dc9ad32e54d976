#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "fasvit/rng.hpp"

using namespace fasvit;

TEST_CASE("rng: same seed gives identical sequences") {
  Rng a(123), b(123);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(123), d(123);
  for (int i = 0; i < 1000; ++i) CHECK(c.uniform() == d.uniform());
}

TEST_CASE("rng: different seeds diverge") {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);
}

TEST_CASE("rng: uniform ranges") {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-3.0, 5.0);
    CHECK(u >= -3.0);
    CHECK(u < 5.0);
  }
}

TEST_CASE("rng: uniform_int bounds and coverage") {
  Rng r(11);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) {
    const auto v = r.uniform_int(6);
    REQUIRE(v < 6);
    ++counts[static_cast<int>(v)];
  }
  // 3 sigma binomial band around n/6.
  const double p = 1.0 / 6.0;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) < 3 * sigma);
}

TEST_CASE("rng: normal moments within Monte Carlo bounds") {
  Rng r(5);
  const int n = 100000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  // var of sample variance of a normal is ~2/n.
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
}

TEST_CASE("rng: truncated normal stays within two sigma") {
  Rng r(9);
  for (int i = 0; i < 20000; ++i) {
    const double x = r.truncated_normal(1.0, 0.5);
    CHECK(x >= 1.0 - 2 * 0.5);
    CHECK(x <= 1.0 + 2 * 0.5);
  }
}

TEST_CASE("rng: child streams are reproducible and distinct") {
  Rng parent(77);
  Rng c1 = parent.child(1);
  Rng c2 = Rng(77).child(1);
  for (int i = 0; i < 100; ++i) CHECK(c1.next_u64() == c2.next_u64());

  Rng a = Rng(77).child(1);
  Rng b = Rng(77).child(2);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
  CHECK(same == 0);

  // Drawing from the parent does not perturb child derivation.
  Rng p2(77);
  p2.next_u64();
  Rng c3 = p2.child(1);
  Rng c4 = Rng(77).child(1);
  CHECK(c3.next_u64() == c4.next_u64());
}

TEST_CASE("rng: splitmix64 is a deterministic bijective-looking mix") {
  CHECK(splitmix64(0) == splitmix64(0));
  std::set<std::uint64_t> outs;
  for (std::uint64_t i = 0; i < 1000; ++i) outs.insert(splitmix64(i));
  CHECK(outs.size() == 1000);
  CHECK(splitmix64(1) != 1);
}
