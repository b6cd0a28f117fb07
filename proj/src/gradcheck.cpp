#include "acm/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace acm::ag {

Tensor finite_diff_grad(const std::function<double()>& f, Parameter& p, double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::invalid_argument, "finite-difference eps must be positive");
  Tensor out(p.value.shape());
  for (std::size_t i = 0; i < p.value.numel(); ++i) {
    const float orig = p.value[i];
    const float hi = static_cast<float>(orig + eps);
    const float lo = static_cast<float>(orig - eps);
    p.value[i] = hi;
    const double f_hi = f();
    p.value[i] = lo;
    const double f_lo = f();
    p.value[i] = orig;
    out[i] = static_cast<float>((f_hi - f_lo) / (static_cast<double>(hi) - static_cast<double>(lo)));
  }
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

GradCheckResult check_gradients(const std::string& name, const std::function<Var(Graph&)>& build,
                                const std::vector<Parameter*>& params, const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0)) fail(ErrorCode::invalid_argument, "gradcheck eps must be positive");
  GradCheckResult r{name};

  std::uint64_t base_sig = 0;
  {
    Graph g;
    const Var loss = build(g);
    g.backward(loss);
    base_sig = g.relu_signature();
  }
  auto probe = [&]() {
    Graph g;
    const Var loss = build(g);
    return Probe{g.scalar(loss), g.relu_signature()};
  };

  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const float orig = p->value[i];
      const float hi = static_cast<float>(orig + opts.eps);
      const float lo = static_cast<float>(orig - opts.eps);
      p->value[i] = hi;
      const Probe ph = probe();
      p->value[i] = lo;
      const Probe pl = probe();
      p->value[i] = orig;
      if (ph.relu_signature != base_sig || pl.relu_signature != base_sig) {
        ++r.skipped;
        continue;
      }
      const double numeric = (ph.loss - pl.loss) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double a = static_cast<double>(analytic[i]) * opts.corrupt_scale;
      r.max_rel_error = std::max(r.max_rel_error, relative_error(a, numeric, opts.floor));
      ++r.checked;
    }
  }
  r.passed = r.checked > 0 && r.max_rel_error < opts.tol;
  return r;
}

namespace {

// Uniform values pushed at least `margin` away from zero, so ReLU inputs do
// not start on a kink.
Tensor away_from_zero(Shape shape, Pcg32& rng, float margin = 0.1f) {
  Tensor t = random_uniform(std::move(shape), rng);
  for (auto& v : t.data())
    if (std::fabs(v) < margin) v = v < 0.0f ? v - margin : v + margin;
  return t;
}

// loss = sum(out * R) for a fixed random R: a generic linear probe of out
Var weighted_sum(Graph& g, Var out, const Tensor& weights) { return g.sum(g.mul(out, g.constant(weights))); }

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opts) {
  Pcg32 rng(seed, streams::inputs);
  std::vector<GradCheckResult> results;

  {
    Parameter x("input", random_uniform({2, 5, 5}, rng)), k("kernel", random_uniform({3, 2, 3, 3}, rng));
    const Tensor R = random_uniform({3, 3, 3}, rng);
    results.push_back(check_gradients(
        "conv2d_valid", [&](Graph& g) { return weighted_sum(g, g.conv2d(g.param(x), g.param(k)), R); }, {&x, &k},
        opts));
  }
  {
    Parameter s("search", random_uniform({3, 6, 6}, rng)), t("template", random_uniform({3, 3, 3}, rng));
    const Tensor R = random_uniform({3, 4, 4}, rng);
    results.push_back(check_gradients(
        "depthwise_corr",
        [&](Graph& g) { return weighted_sum(g, g.depthwise_corr(g.param(s), g.param(t)), R); }, {&s, &t}, opts));
  }
  {
    Parameter s("search", random_uniform({3, 6, 5}, rng)), t("template", random_uniform({3, 2, 3}, rng));
    const Tensor R = random_uniform({1, 5, 3}, rng);
    results.push_back(check_gradients(
        "xcorr", [&](Graph& g) { return weighted_sum(g, g.xcorr(g.param(s), g.param(t)), R); }, {&s, &t}, opts));
  }
  {
    Parameter a("a", random_uniform({3, 1, 1}, rng)), b("b", random_uniform({3, 4, 4}, rng));
    const Tensor R = random_uniform({3, 4, 4}, rng);
    results.push_back(check_gradients(
        "broadcast_add", [&](Graph& g) { return weighted_sum(g, g.add(g.param(a), g.param(b)), R); }, {&a, &b},
        opts));
  }
  {
    Parameter x("x", away_from_zero({24}, rng));
    const Tensor R = random_uniform({24}, rng);
    results.push_back(
        check_gradients("relu", [&](Graph& g) { return weighted_sum(g, g.relu(g.param(x)), R); }, {&x}, opts));
  }
  {
    Parameter x("x", random_uniform({2}, rng, 0.2f, 1.0f));
    Mlp3Params m = init_mlp3("mlp", 2, 6, 4, rng);
    for (auto& l : m) l.bias.value = random_uniform(l.bias.value.shape(), rng, -0.5f, 0.5f);
    const Tensor R = random_uniform({4}, rng);
    std::vector<Parameter*> ps{&x};
    for (auto& l : m) {
      ps.push_back(&l.weight);
      ps.push_back(&l.bias);
    }
    results.push_back(check_gradients(
        "mlp3", [&](Graph& g) { return weighted_sum(g, mlp3(g, g.param(x), m), R); }, ps, opts));
  }
  {
    Parameter x("x", random_uniform({3, 4, 4}, rng)), gamma("gamma", random_uniform({3}, rng, 0.5f, 1.5f)),
        beta("beta", random_uniform({3}, rng));
    const Tensor mean = random_uniform({3}, rng, -0.2f, 0.2f), var = random_uniform({3}, rng, 0.5f, 2.0f);
    const Tensor R = random_uniform({3, 4, 4}, rng);
    results.push_back(check_gradients(
        "batchnorm_infer",
        [&](Graph& g) {
          return weighted_sum(g, g.batchnorm(g.param(x), g.param(gamma), g.param(beta), mean, var), R);
        },
        {&x, &gamma, &beta}, opts));
  }
  {
    Parameter c("corr", random_uniform({4, 3, 3}, rng)), k("kernel", random_uniform({2, 4, 1, 1}, rng));
    const Tensor R = random_uniform({2, 3, 3}, rng);
    results.push_back(check_gradients(
        "head1x1", [&](Graph& g) { return weighted_sum(g, g.head1x1(g.param(c), g.param(k)), R); }, {&c, &k},
        opts));
  }
  {
    Parameter logits("logits", random_uniform({5}, rng, -2.0f, 2.0f));
    results.push_back(check_gradients(
        "softmax_xent", [&](Graph& g) { return g.softmax_xent(g.param(logits), 2); }, {&logits}, opts));
  }
  {
    const std::size_t C = 2, P = 4;
    Parameter tmpl("template", random_uniform({C, 3, 3}, rng)), search("search", random_uniform({C, 6, 6}, rng));
    AcmParams p{Parameter("theta_z", init_uniform({P, C, 3, 3}, C * 9, rng)),
                Parameter("theta_x", init_uniform({P, C, 3, 3}, C * 9, rng)),
                init_mlp3("prior", 2, 8, P, rng),
                NormParams{Parameter("bn.gamma", random_uniform({P}, rng, 0.5f, 1.5f)),
                           Parameter("bn.beta", random_uniform({P}, rng, -0.5f, 0.5f)),
                           random_uniform({P}, rng, -0.2f, 0.2f), random_uniform({P}, rng, 0.5f, 2.0f)},
                255.0f};
    for (auto& l : *p.prior) l.bias.value = random_uniform(l.bias.value.shape(), rng, -0.5f, 0.5f);
    const Tensor box = Tensor::from({2}, {120.0f / 255.0f, 80.0f / 255.0f});
    std::vector<Parameter*> ps = p.parameters();
    ps.push_back(&tmpl);
    ps.push_back(&search);
    results.push_back(check_gradients(
        "acm_block",
        [&](Graph& g) {
          const Var fused = acm(g, g.param(tmpl), g.param(search), p, g.constant(box), true);
          return g.softmax_xent(g.global_avg_pool(fused), 1);
        },
        ps, opts));
  }
  return results;
}

}  // namespace acm::ag
