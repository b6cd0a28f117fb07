#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "acm/tensor.hpp"

namespace acm {

// PCG32 (XSH-RR output on a 64-bit LCG state). Satisfies
// UniformRandomBitGenerator so it plugs into <random> distributions.
//
// Streams: the LCG increment is derived from `stream`, so Pcg32(seed, a)
// and Pcg32(seed, b) are independent sequences for a != b. The library
// carves streams as follows:
//   0           parameter initialisation
//   1           training sample order
//   2           shuffled-index evaluation
//   3           benchmark / check inputs
//   1 << 32 + i dataset sample i (train split)
//   2 << 32 + i dataset sample i (test split)
//   3 << 32 + i equivalence-check trial i
class Pcg32 {
 public:
  using result_type = std::uint32_t;

  explicit Pcg32(std::uint64_t seed = 0x853c49e6748fea9bULL, std::uint64_t stream = 0)
      : inc_((stream << 1u) | 1u) {
    (*this)();
    state_ += seed;
    (*this)();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31u));
  }

  // Uniform in [lo, hi).
  float uniform(float lo, float hi) { return std::uniform_real_distribution<float>(lo, hi)(*this); }
  std::uint32_t below(std::uint32_t n) { return std::uniform_int_distribution<std::uint32_t>(0, n - 1)(*this); }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_;
};

namespace streams {
inline constexpr std::uint64_t init = 0;
inline constexpr std::uint64_t order = 1;
inline constexpr std::uint64_t shuffle = 2;
inline constexpr std::uint64_t inputs = 3;
inline constexpr std::uint64_t train_sample(std::uint64_t i) { return (1ULL << 32) + i; }
inline constexpr std::uint64_t test_sample(std::uint64_t i) { return (2ULL << 32) + i; }
inline constexpr std::uint64_t eq_trial(std::uint64_t i) { return (3ULL << 32) + i; }
}  // namespace streams

inline Tensor random_uniform(Shape shape, Pcg32& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace acm
