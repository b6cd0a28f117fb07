#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "acm/autograd.hpp"

namespace acm::ag {

// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) for every
// element of p. f is evaluated in f64; the step actually applied after f32
// rounding of p is used as the denominator. p.value is restored.
Tensor finite_diff_grad(const std::function<double()>& f, Parameter& p, double eps);

struct Probe {
  double loss = 0.0;
  std::uint64_t relu_signature = 0;
};

struct GradCheckOptions {
  double eps = 1e-2;
  double tol = 1e-2;
  // Denominator floor for the relative error, so near-zero gradients are
  // compared absolutely against finite-difference noise.
  double floor = 1e-3;
  // Negative control: scale every analytic gradient before comparing.
  double corrupt_scale = 1.0;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose +-eps probe crossed a ReLU kink
  bool passed = false;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

// Builds a fresh graph with `build`, backpropagates, and compares every
// parameter in `params` against central differences. Coordinates where the
// +eps or -eps probe changes the ReLU activation pattern are skipped.
GradCheckResult check_gradients(const std::string& name, const std::function<Var(Graph&)>& build,
                                const std::vector<Parameter*>& params, const GradCheckOptions& opts);

// The full suite: every differentiable op and the composed ACM block, on
// small random shapes drawn from `seed`.
std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opts);

}  // namespace acm::ag
