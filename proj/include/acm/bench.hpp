#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace acm::bench {

struct BenchConfig {
  std::size_t C = 1, eta = 1, omega = 1, H = 1, W = 1, P = 1;
  std::size_t positions() const { return (H - eta + 1) * (W - omega + 1); }
};

struct BenchResult {
  BenchConfig config;
  double naive_ns = 0.0;
  double acm_ns = 0.0;
  double cached_ns = 0.0;
  std::size_t reps = 0;
  double speedup_naive_over_acm = 0.0;
  float max_diff_naive_acm = 0.0f;
  float max_diff_cached = 0.0f;
};

struct BenchOptions {
  std::size_t reps = 20;    // measured calls, >= 20
  std::size_t warmup = 3;   // discarded calls, >= 3
  std::uint64_t seed = 7;
  bool with_prior = true;   // give acm/cached a box prior branch
  std::size_t prior_hidden = 64;
  float tol = 1e-4f;        // correctness gate before timing
};

template <class T>
inline void do_not_optimize(const T& value) {
  asm volatile("" : : "g"(&value) : "memory");
}

// Median wall time (steady clock) of `reps` calls after `warmup` calls.
template <class Fn>
double median_ns(Fn&& fn, std::size_t reps, std::size_t warmup) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> samples(reps);
  for (auto& s : samples) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    s = std::chrono::duration<double, std::nano>(t1 - t0).count();
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

// Times naive_concat_corr, acm_forward (ReLU off) and acm_apply_search on a
// pre-built cache. Throws CheckFailed before timing if outputs disagree.
BenchResult bench_one(const BenchConfig& cfg, const BenchOptions& opts);
std::vector<BenchResult> bench_compare(const std::vector<BenchConfig>& configs, const BenchOptions& opts);

inline constexpr const char* kBenchCsvHeader = "C,eta,omega,H,W,P,reps,naive_ns,acm_ns,cached_ns,speedup";
std::string bench_csv(const std::vector<BenchResult>& results);
void write_bench_csv(const std::vector<BenchResult>& results, const std::filesystem::path& path);
// Header C,eta,omega,H,W,P then one config per row.
std::vector<BenchConfig> read_bench_configs(const std::filesystem::path& path);

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct SweepResult {
  std::vector<double> positions;
  std::vector<double> naive_ns;
  double slope = 0.0;
};

// Naive cost at fixed kernel size over search sides giving output grids of
// `out_sides` x `out_sides`.
SweepResult naive_cost_sweep(std::size_t C, std::size_t kernel, std::size_t P, const std::vector<std::size_t>& out_sides,
                             const BenchOptions& opts);

}  // namespace acm::bench
