#include "fasvit/rng.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "fasvit/common.hpp"

namespace fasvit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
  const std::uint64_t limit = UINT64_MAX / n * n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double Rng::normal() {
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::truncated_normal(double mean, double sigma) {
  double z;
  do {
    z = normal();
  } while (z < -2.0 || z > 2.0);
  return mean + sigma * z;
}

Rng Rng::child(std::uint64_t stream) const {
  return Rng(splitmix64(seed_ + 0x9e3779b97f4a7c15ULL * (stream + 1)));
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace fasvit
