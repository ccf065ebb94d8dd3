#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sufisent/numarray.hpp"

namespace sufisent {

// Seeded PRNG wrapper. All randomness in the project flows through this type
// so that runs are reproducible across platforms; draws avoid
// std::uniform_*_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

  // Uniform integer in [lo, hi] inclusive.
  std::size_t range(std::size_t lo, std::size_t hi) { return lo + index(hi - lo + 1); }

  // Fisher-Yates, deterministic for a given seed.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

inline NumArray random_uniform(Shape shape, double lo, double hi, Rng& rng) {
  NumArray out(std::move(shape));
  for (double& v : out.data) v = rng.uniform(lo, hi);
  return out;
}

}  // namespace sufisent
