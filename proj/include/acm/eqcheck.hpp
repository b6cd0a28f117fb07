#pragma once

#include <cstdint>
#include <vector>

#include "acm/bench.hpp"
#include "acm/exec.hpp"

namespace acm {

struct EqTrial {
  bench::BenchConfig shape;
  float max_diff = 0.0f;
};

// Random shape from trial i's own stream: C, P in [1,8], eta, omega in
// [1,5], H in [eta,12], W in [omega,12].
bench::BenchConfig random_eq_shape(std::uint64_t seed, std::size_t trial);

// Pre-activation acm_forward against naive_concat_corr on random data.
EqTrial run_eq_trial(std::uint64_t seed, std::size_t trial);

// Trials are independent; Exec::parallel spreads them over threads with
// identical per-trial results.
std::vector<EqTrial> run_eqcheck(std::size_t trials, std::uint64_t seed, Exec exec = Exec::sequential);

}  // namespace acm
