#pragma once

#include <cstdint>
#include <random>

namespace fasvit {

// Deterministic random source. The engine is std::mt19937_64 (bit-exact by
// the standard); all distribution transforms are written out here instead of
// using std::*_distribution, whose output is implementation-defined. Same
// seed therefore gives the same draw sequence on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller; consumes exactly two engine draws.
  double normal();

  // Normal truncated to mean +/- 2 sigma by rejection (the usual init rule).
  double truncated_normal(double mean, double sigma);

  // Independent child stream. Children of the same parent with distinct
  // stream ids are decorrelated; the derivation is a fixed splitmix64 mix so
  // the hierarchy is reproducible.
  Rng child(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

// splitmix64 finalizer, exposed for seed derivation in tests.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace fasvit
