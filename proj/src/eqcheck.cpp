#include "acm/eqcheck.hpp"

#include "acm/fusion.hpp"
#include "acm/rng.hpp"

namespace acm {

namespace {

std::size_t draw(Pcg32& rng, std::size_t lo, std::size_t hi) {
  return lo + rng.below(static_cast<std::uint32_t>(hi - lo + 1));
}

bench::BenchConfig draw_shape(Pcg32& rng) {
  bench::BenchConfig c;
  c.C = draw(rng, 1, 8);
  c.eta = draw(rng, 1, 5);
  c.omega = draw(rng, 1, 5);
  c.H = draw(rng, c.eta, 12);
  c.W = draw(rng, c.omega, 12);
  c.P = draw(rng, 1, 8);
  return c;
}

}  // namespace

bench::BenchConfig random_eq_shape(std::uint64_t seed, std::size_t trial) {
  Pcg32 rng(seed, streams::eq_trial(trial));
  return draw_shape(rng);
}

EqTrial run_eq_trial(std::uint64_t seed, std::size_t trial) {
  Pcg32 rng(seed, streams::eq_trial(trial));
  EqTrial t;
  t.shape = draw_shape(rng);
  const auto& c = t.shape;
  FusionWeights w;
  w.theta_z = ConvKernel(random_uniform({c.P, c.C, c.eta, c.omega}, rng));
  w.theta_x = ConvKernel(random_uniform({c.P, c.C, c.eta, c.omega}, rng));
  const Tensor tmpl = random_uniform({c.C, c.eta, c.omega}, rng);
  const Tensor search = random_uniform({c.C, c.H, c.W}, rng);
  t.max_diff = max_abs_diff(naive_concat_corr(tmpl, search, w), acm_forward(tmpl, search, w, std::nullopt, false));
  return t;
}

std::vector<EqTrial> run_eqcheck(std::size_t trials, std::uint64_t seed, Exec exec) {
  std::vector<EqTrial> out(trials);
  const auto n = static_cast<std::ptrdiff_t>(trials);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = run_eq_trial(seed, static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = run_eq_trial(seed, static_cast<std::size_t>(i));
  }
  return out;
}

}  // namespace acm
