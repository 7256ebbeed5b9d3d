#pragma once

#include "surprise_rl/common.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace srl {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Derives an independent stream seed from a master seed and a stream name.
/// Extra indices (update counter, attempt counter, ...) can be mixed in.
inline uint64_t derive_seed(uint64_t master, std::string_view stream) {
  return splitmix64(master ^ fnv1a64(stream));
}
inline uint64_t derive_seed(uint64_t master, std::string_view stream, uint64_t index) {
  return splitmix64(derive_seed(master, stream) ^ splitmix64(index));
}

/// Deterministic random source. All sampling is implemented here (instead of
/// relying on std:: distributions) so that stream contents depend only on the
/// seed, not on the standard library version.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes exactly two draws.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // log(0) guard
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniform integer in [0, n), bias-free via rejection.
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) throw ContractError("uniform_int: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Samples an index from an (unnormalized-tolerant) probability vector.
  int categorical(const Vec& probs) {
    const double total = probs.sum();
    double r = uniform() * total;
    for (int i = 0; i < probs.size(); ++i) {
      r -= probs[i];
      if (r < 0.0) return i;
    }
    return static_cast<int>(probs.size()) - 1;
  }

  /// Fills a matrix with standard normal draws, row-major order.
  Mat normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace srl
