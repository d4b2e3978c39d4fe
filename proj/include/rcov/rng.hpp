#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace rcov {

// Counter-friendly splitmix64 generator. Chosen over <random> engines and
// distributions because their output is not specified bit-for-bit across
// standard library implementations, and every seeded run of this project
// must produce byte-identical results on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard Gaussian via Box-Muller; two uniforms per draw, no cached state.
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Independent child stream; used to derive per-replication / per-split
  // generators from a single user seed.
  Rng stream(std::uint64_t idx) const {
    std::uint64_t z = state_ ^ (0xA24BAED4963EE407ULL * (idx + 1));
    z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDULL;
    z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ULL;
    return Rng(z ^ (z >> 33));
  }

  // k distinct indices sampled uniformly from {0, ..., n-1} (partial
  // Fisher-Yates), returned in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

 private:
  std::uint64_t state_;
};

inline constexpr std::uint64_t kDefaultSeed = 12345;

}  // namespace rcov
