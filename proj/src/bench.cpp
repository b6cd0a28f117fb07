#include "acm/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "acm/autograd.hpp"
#include "acm/fusion.hpp"
#include "acm/rng.hpp"

namespace acm::bench {

BenchResult bench_one(const BenchConfig& cfg, const BenchOptions& opts) {
  if (opts.reps < 20 || opts.warmup < 3)
    fail(ErrorCode::invalid_argument, "need reps >= 20 and warmup >= 3");
  if (cfg.eta > cfg.H || cfg.omega > cfg.W)
    fail(ErrorCode::kernel_too_large, "template larger than search region");

  Pcg32 rng(opts.seed, streams::inputs);
  const Tensor tmpl = random_uniform({cfg.C, cfg.eta, cfg.omega}, rng);
  const Tensor search = random_uniform({cfg.C, cfg.H, cfg.W}, rng);
  const std::size_t fan_in = cfg.C * cfg.eta * cfg.omega;
  FusionWeights plain;
  plain.theta_z = ConvKernel(ag::init_uniform({cfg.P, cfg.C, cfg.eta, cfg.omega}, fan_in, rng));
  plain.theta_x = ConvKernel(ag::init_uniform({cfg.P, cfg.C, cfg.eta, cfg.omega}, fan_in, rng));
  FusionWeights full = plain;
  std::optional<BoxSize> box;
  if (opts.with_prior) {
    full.prior = ag::to_layers(ag::init_mlp3("prior", 2, opts.prior_hidden, cfg.P, rng));
    box = BoxSize{64.0f, 48.0f};
  }

  BenchResult r;
  r.config = cfg;
  r.reps = opts.reps;

  // correctness gate
  const Tensor naive = naive_concat_corr(tmpl, search, plain);
  r.max_diff_naive_acm = max_abs_diff(naive, acm_forward(tmpl, search, plain, std::nullopt, false));
  if (!(r.max_diff_naive_acm <= opts.tol))
    fail(ErrorCode::check_failed, "naive vs acm differ by " + std::to_string(r.max_diff_naive_acm));
  const TemplateCache cache = acm_cache_template(tmpl, full, box);
  r.max_diff_cached =
      max_abs_diff(acm_apply_search(cache, search, full, false), acm_forward(tmpl, search, full, box, false));
  if (!(r.max_diff_cached <= opts.tol))
    fail(ErrorCode::check_failed, "cached vs uncached differ by " + std::to_string(r.max_diff_cached));

  r.naive_ns = median_ns([&] { do_not_optimize(naive_concat_corr(tmpl, search, plain)); }, opts.reps, opts.warmup);
  r.acm_ns = median_ns([&] { do_not_optimize(acm_forward(tmpl, search, full, box, false)); }, opts.reps, opts.warmup);
  r.cached_ns = median_ns([&] { do_not_optimize(acm_apply_search(cache, search, full, false)); }, opts.reps, opts.warmup);
  r.speedup_naive_over_acm = r.naive_ns / r.acm_ns;
  return r;
}

std::vector<BenchResult> bench_compare(const std::vector<BenchConfig>& configs, const BenchOptions& opts) {
  std::vector<BenchResult> out;
  out.reserve(configs.size());
  for (const auto& c : configs) out.push_back(bench_one(c, opts));
  return out;
}

std::string bench_csv(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  os << kBenchCsvHeader << '\n';
  char buf[256];
  for (const auto& r : results) {
    const auto& c = r.config;
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%zu,%zu,%zu,%.0f,%.0f,%.0f,%.4f\n", c.C, c.eta, c.omega, c.H, c.W,
                  c.P, r.reps, r.naive_ns, r.acm_ns, r.cached_ns, r.speedup_naive_over_acm);
    os << buf;
  }
  return os.str();
}

void write_bench_csv(const std::vector<BenchResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path.string());
  out << bench_csv(results);
}

std::vector<BenchConfig> read_bench_configs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::format_error, "empty config file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "C,eta,omega,H,W,P") fail(ErrorCode::format_error, "config header must be C,eta,omega,H,W,P");
  std::vector<BenchConfig> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    BenchConfig c;
    if (std::sscanf(line.c_str(), "%zu,%zu,%zu,%zu,%zu,%zu", &c.C, &c.eta, &c.omega, &c.H, &c.W, &c.P) != 6)
      fail(ErrorCode::format_error, "bad config row: " + line);
    if (!c.C || !c.eta || !c.omega || !c.P || c.eta > c.H || c.omega > c.W)
      fail(ErrorCode::format_error, "invalid shape in row: " + line);
    out.push_back(c);
  }
  return out;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) fail(ErrorCode::invalid_argument, "need >= 2 paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

SweepResult naive_cost_sweep(std::size_t C, std::size_t kernel, std::size_t P, const std::vector<std::size_t>& out_sides,
                             const BenchOptions& opts) {
  SweepResult s;
  Pcg32 rng(opts.seed, streams::inputs);
  FusionWeights w;
  w.theta_z = ConvKernel(random_uniform({P, C, kernel, kernel}, rng));
  w.theta_x = ConvKernel(random_uniform({P, C, kernel, kernel}, rng));
  const Tensor tmpl = random_uniform({C, kernel, kernel}, rng);
  for (std::size_t side : out_sides) {
    const Tensor search = random_uniform({C, side + kernel - 1, side + kernel - 1}, rng);
    s.positions.push_back(static_cast<double>(side * side));
    s.naive_ns.push_back(
        median_ns([&] { do_not_optimize(naive_concat_corr(tmpl, search, w)); }, opts.reps, opts.warmup));
  }
  s.slope = loglog_slope(s.positions, s.naive_ns);
  return s;
}

}  // namespace acm::bench
