#include <cmath>
#include <cstdint>
#include <vector>

#include "fasvit/augment.hpp"
#include "fasvit/rng.hpp"

namespace fasvit {
namespace {

constexpr int kSide = 64;
constexpr int kCount = kSide * kSide;
constexpr double kSigma = 1.5;

// Toroidal Gaussian energy kernel indexed by wrapped (dy, dx).
std::vector<double> make_kernel() {
  std::vector<double> k(kCount);
  for (int dy = 0; dy < kSide; ++dy)
    for (int dx = 0; dx < kSide; ++dx) {
      const int wy = std::min(dy, kSide - dy);
      const int wx = std::min(dx, kSide - dx);
      k[static_cast<size_t>(dy) * kSide + dx] =
          std::exp(-(wy * wy + wx * wx) / (2.0 * kSigma * kSigma));
    }
  return k;
}

struct Energy {
  const std::vector<double>& kernel;
  std::vector<double> e;

  explicit Energy(const std::vector<double>& k) : kernel(k), e(kCount, 0.0) {}

  void apply(int pos, double sign) {
    const int py = pos / kSide, px = pos % kSide;
    for (int y = 0; y < kSide; ++y) {
      const int dy = (y - py + kSide) % kSide;
      const double* row = kernel.data() + static_cast<size_t>(dy) * kSide;
      double* erow = e.data() + static_cast<size_t>(y) * kSide;
      for (int x = 0; x < kSide; ++x) erow[x] += sign * row[(x - px + kSide) % kSide];
    }
  }
};

int tightest_cluster(const Energy& en, const std::vector<std::uint8_t>& ones) {
  int best = -1;
  double best_e = -1.0;
  for (int i = 0; i < kCount; ++i)
    if (ones[i] && en.e[i] > best_e) {
      best_e = en.e[i];
      best = i;
    }
  return best;
}

int largest_void(const Energy& en, const std::vector<std::uint8_t>& ones) {
  int best = -1;
  double best_e = 0.0;
  for (int i = 0; i < kCount; ++i)
    if (!ones[i] && (best < 0 || en.e[i] < best_e)) {
      best_e = en.e[i];
      best = i;
    }
  return best;
}

std::vector<float> build_mask() {
  const auto kernel = make_kernel();

  // Seed pattern: ten percent minority pixels, spread by swapping the
  // tightest cluster into the largest void until the swap is a fixed point.
  std::vector<std::uint8_t> ones(kCount, 0);
  Energy en(kernel);
  Rng rng(0x424e4d41534bULL);
  const int n_minority = kCount / 10;
  int placed = 0;
  while (placed < n_minority) {
    const int i = static_cast<int>(rng.uniform_int(kCount));
    if (!ones[i]) {
      ones[i] = 1;
      en.apply(i, 1.0);
      ++placed;
    }
  }
  for (int iter = 0; iter < 10 * kCount; ++iter) {
    const int c = tightest_cluster(en, ones);
    ones[c] = 0;
    en.apply(c, -1.0);
    const int v = largest_void(en, ones);
    ones[v] = 1;
    en.apply(v, 1.0);
    if (v == c) break;
  }

  std::vector<int> rank(kCount, 0);

  // Phase 1: rank the seed minority pixels by removing tightest clusters.
  {
    std::vector<std::uint8_t> work = ones;
    Energy we(kernel);
    for (int i = 0; i < kCount; ++i)
      if (work[i]) we.apply(i, 1.0);
    for (int r = n_minority - 1; r >= 0; --r) {
      const int c = tightest_cluster(we, work);
      work[c] = 0;
      we.apply(c, -1.0);
      rank[c] = r;
    }
  }

  // Phases 2 and 3: grow from the seed pattern, always filling the largest
  // void. With a symmetric kernel the complement-energy rule used once the
  // ones become the majority selects the same pixel, so one rule covers both.
  {
    std::vector<std::uint8_t> work = ones;
    Energy we(kernel);
    for (int i = 0; i < kCount; ++i)
      if (work[i]) we.apply(i, 1.0);
    for (int r = n_minority; r < kCount; ++r) {
      const int v = largest_void(we, work);
      work[v] = 1;
      we.apply(v, 1.0);
      rank[v] = r;
    }
  }

  std::vector<float> mask(kCount);
  for (int i = 0; i < kCount; ++i)
    mask[i] = static_cast<float>((rank[i] + 0.5) / kCount);
  return mask;
}

}  // namespace

const std::vector<float>& blue_noise_mask(int& side) {
  static const std::vector<float> mask = build_mask();
  side = kSide;
  return mask;
}

}  // namespace fasvit
