// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "acm/analysis.hpp"
#include "acm/bench.hpp"
#include "acm/eqcheck.hpp"
#include "acm/fusion.hpp"
#include "acm/gradcheck.hpp"
#include "acm/toytask.hpp"
#include "acm/tsr_io.hpp"

#ifndef ACM_CLI
#error "ACM_CLI must name the command-line binary"
#endif

using namespace acm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args, std::string* out) {
  FILE* p = popen((std::string(ACM_CLI) + " " + args + " 2>&1").c_str(), "r");
  if (!p) return -1;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) out->append(buf, n);
  const int st = pclose(p);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

// ---- 1 ----------------------------------------------------------------
Outcome equivalence() {
  Outcome o;
  const auto t0 = Clock::now();
  std::string out;
  const int code = run_cli("eqcheck --trials 100 --seed 7", &out);
  const double secs = seconds_since(t0);
  o.require(code == 0, "eqcheck exit " + std::to_string(code));
  o.require(out.find("100/100 trials within tol 0.0001") != std::string::npos, "all 100 trials within 1e-4");

  float worst = 0.0f;
  for (const auto& t : run_eqcheck(100, 7)) worst = std::max(worst, t.max_diff);
  o.require(worst <= 1e-4f, fmt("worst max abs diff %.3e <= 1e-4", worst));
  o.require(secs < 10.0, fmt("cli runtime %.2f s < 10 s", secs));
  return o;
}

// ---- 2 ----------------------------------------------------------------
Outcome shape_law() {
  Outcome o;
  Pcg32 rng(2024, streams::inputs);
  auto draw = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(static_cast<std::uint32_t>(hi - lo + 1)); };
  std::size_t checked = 0, bad = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t C = draw(1, 8), eta = draw(1, 5), omega = draw(1, 5), H = draw(eta, 12), W = draw(omega, 12),
                      P = draw(1, 8);
    const Tensor tmpl = random_uniform({C, eta, omega}, rng), search = random_uniform({C, H, W}, rng);
    FusionWeights w;
    w.theta_z = ConvKernel(random_uniform({P, C, eta, omega}, rng));
    w.theta_x = ConvKernel(random_uniform({P, C, eta, omega}, rng));
    FusionWeights full = w;
    full.prior = Mlp3{FcLayer{random_uniform({6, 2}, rng), random_uniform({6}, rng)},
                      FcLayer{random_uniform({6, 6}, rng), random_uniform({6}, rng)},
                      FcLayer{random_uniform({P, 6}, rng), random_uniform({P}, rng)}};
    full.norm = BatchNormParams{random_uniform({P}, rng), random_uniform({P}, rng), random_uniform({P}, rng),
                                random_uniform({P}, rng, 0.1f, 1.0f)};
    const BoxSize box{32, 48};
    const Shape expect_p{P, H - eta + 1, W - omega + 1}, expect_c{C, H - eta + 1, W - omega + 1};
    const std::vector<std::pair<Tensor, Shape>> outs = {
        {naive_concat_corr(tmpl, search, w), expect_p},
        {acm_forward(tmpl, search, w, std::nullopt, false), expect_p},
        {acm_forward(tmpl, search, w, std::nullopt, true), expect_p},
        {acm_forward(tmpl, search, full, box, true), expect_p},
        {acm_apply_search(acm_cache_template(tmpl, full, box), search, full, true), expect_p},
        {depthwise_corr(search, tmpl), expect_c},
        {xcorr(search, tmpl), Shape{1, H - eta + 1, W - omega + 1}},
    };
    for (const auto& [t_out, expect] : outs) {
      ++checked;
      bad += t_out.shape() != expect;
    }
  }
  o.require(bad == 0, std::to_string(checked - bad) + "/" + std::to_string(checked) + " outputs have the exact shape");
  return o;
}

// ---- 3 ----------------------------------------------------------------
Outcome gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto results = ag::run_gradcheck_suite(7, {});
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string failed;
  for (const auto& r : results) {
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed || r.checked == 0) failed += " " + r.name;
  }
  o.require(results.size() == 10, std::to_string(results.size()) + " ops checked");
  o.require(failed.empty(), fmt("worst relative error %.3e < 1e-2", worst) + (failed.empty() ? "" : ", failing:" + failed));
  o.require(secs < 30.0, fmt("runtime %.2f s < 30 s", secs));
  return o;
}

// ---- 4 and 5 share the trained models ----------------------------------
struct ToyRuns {
  toy::TrainResult with_index, ablated;
  double seconds = 0.0;
};

const ToyRuns& toy_runs() {
  static const ToyRuns runs = [] {
    ToyRuns r;
    const auto t0 = Clock::now();
    toy::TrainConfig cfg;  // K=4, 2000 train / 1000 test, 20 epochs
    r.with_index = toy::toy_train(cfg);
    cfg.ablate_index = true;
    r.ablated = toy::toy_train(cfg);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return runs;
}

Outcome toy_experiment() {
  Outcome o;
  const toy::TrainConfig cfg;
  o.require(cfg.classes == 4 && cfg.n_train == 2000 && cfg.n_test == 1000 && cfg.epochs <= 20,
            "K=4, 2000/1000 samples, " + std::to_string(cfg.epochs) + " epochs");
  const auto& r = toy_runs();
  o.require(r.with_index.test_accuracy >= 0.95, fmt("accuracy with index %.4f >= 0.95", r.with_index.test_accuracy));
  o.require(r.ablated.test_accuracy <= 0.35, fmt("accuracy with index zeroed %.4f <= 0.35", r.ablated.test_accuracy));
  o.require(r.seconds < 300.0, fmt("both runs %.1f s < 300 s", r.seconds));
  return o;
}

Outcome locality() {
  Outcome o;
  const auto& r = toy_runs();
  const double loc = toy::fusion_locality(r.with_index.model, r.with_index.test_set);
  o.require(loc >= 0.8, fmt("queried quadrant holds the max L1 mass in %.4f of test samples (>= 0.8)", loc));
  return o;
}

// ---- 6 ----------------------------------------------------------------
struct DiscOracle {
  std::size_t dr, dc;
  double cosine, euclid;
};

DiscOracle disc_oracle(const Tensor& t, std::size_t tr, std::size_t tc, const ExcludeBox& b) {
  const std::size_t N = t.dim(0), H = t.dim(1), W = t.dim(2);
  double best = -1.0;
  std::size_t dr = 0, dc = 0;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      if (r >= b.r0 && r <= b.r1 && c >= b.c0 && c <= b.c1) continue;
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) s += std::fabs(static_cast<double>(t.at(n, r, c)));
      if (s > best) {
        best = s;
        dr = r;
        dc = c;
      }
    }
  double lo = 1e300, hi = -1e300;
  for (float v : t.data()) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  double dot = 0, na = 0, nb = 0, ss = 0;
  for (std::size_t n = 0; n < N; ++n) {
    const double a = t.at(n, tr, tc), d = t.at(n, dr, dc);
    dot += a * d;
    na += a * a;
    nb += d * d;
    const double e = (a - d) / (hi - lo);
    ss += e * e;
  }
  return {dr, dc, dot / std::sqrt(na * nb), std::sqrt(ss)};
}

double diversity_oracle(const Tensor& t) {
  const std::size_t N = t.dim(0), plane = t.dim(1) * t.dim(2);
  std::vector<double> m(N, -1e300);
  double g = -1e300;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < plane; ++i) m[n] = std::max(m[n], static_cast<double>(t[n * plane + i]));
    g = std::max(g, m[n]);
  }
  double s = 0.0;
  for (double v : m) s += std::max(v, 0.0) / g;
  return s / static_cast<double>(N);
}

Outcome analysis_protocol() {
  Outcome o;
  // hand-worked 2x3x3 map
  const Tensor small = Tensor::from({2, 3, 3}, {1, 0, 0, 0, 5, 0, 0, 0, 2, 0, 3, 0, 0, 4, 0, 1, 0, -2});
  const auto rep = discriminability(small, {1, 1}, {1, 1, 1, 1});
  const auto div = channel_diversity(small);
  const bool small_ok = rep.distractor_pos == GridPos{2, 2} && rep.cosine &&
                        std::fabs(*rep.cosine - 2.0 / std::sqrt(328.0)) <= 1e-6 &&
                        std::fabs(rep.euclidean_norm01 - std::sqrt(45.0) / 7.0) <= 1e-6 &&
                        std::fabs(div.mean - 0.9) <= 1e-6;
  o.require(small_ok, "2x3x3 hand oracle within 1e-6");

  // crafted 8x5x5: channel c peaks at c+1 on (c%5, c%5), channel 7 all negative
  Tensor big({8, 5, 5});
  for (std::size_t c = 0; c < 7; ++c) big.at(c, c % 5, c % 5) = static_cast<float>(c + 1);
  for (std::size_t i = 0; i < 25; ++i) big[7 * 25 + i] = -1.0f;
  const ExcludeBox box{1, 1, 3, 3};
  const auto br = discriminability(big, {2, 2}, box);
  const auto bo = disc_oracle(big, 2, 2, box);
  const bool big_ok = br.distractor_pos == GridPos{bo.dr, bo.dc} && br.distractor_pos == GridPos{0, 0} &&
                      std::fabs(*br.cosine - bo.cosine) <= 1e-6 && std::fabs(br.euclidean_norm01 - bo.euclid) <= 1e-6 &&
                      std::fabs(channel_diversity(big).mean - 0.5) <= 1e-6;
  o.require(big_ok, "8x5x5 crafted oracle within 1e-6");

  // 1000 random maps: mean in (0,1], loop oracle agreement, scale invariance
  Pcg32 rng(6, streams::inputs);
  std::size_t range_bad = 0, oracle_bad = 0, scale_bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Tensor t = random_uniform({8, 5, 5}, rng);
    const auto d = channel_diversity(t);
    range_bad += !(d.mean > 0.0 && d.mean <= 1.0);
    const auto r = discriminability(t, {2, 2}, box);
    const auto ref = disc_oracle(t, 2, 2, box);
    const double err = std::max({std::fabs(*r.cosine - ref.cosine), std::fabs(r.euclidean_norm01 - ref.euclid),
                                 std::fabs(d.mean - diversity_oracle(t))});
    oracle_bad += err > 1e-6 || r.distractor_pos != GridPos{ref.dr, ref.dc};

    // power-of-two scales are exact in f32; |b| <= a keeps the shifted map's
    // own rounding well below the tolerance
    const float a = std::ldexp(1.0f, static_cast<int>(rng.below(9)) - 4), b = a * rng.uniform(-1.0f, 1.0f);
    Tensor scaled(t.shape()), affine(t.shape());
    for (std::size_t k = 0; k < t.numel(); ++k) {
      scaled[k] = a * t[k];
      affine[k] = a * t[k] + b;
    }
    const auto rs = discriminability(scaled, {2, 2}, box);
    // single exterior cell so the affine shift cannot move the distractor
    const ExcludeBox rest{0, 1, 0, 24};
    const auto e0 = discriminability(t.reshaped({8, 1, 25}), {0, 12}, rest);
    const auto e1 = discriminability(affine.reshaped({8, 1, 25}), {0, 12}, rest);
    const double serr = std::max({std::fabs(*rs.cosine - *r.cosine), std::fabs(rs.euclidean_norm01 - r.euclidean_norm01),
                                  std::fabs(e1.euclidean_norm01 - e0.euclidean_norm01),
                                  std::fabs(channel_diversity(scaled).mean - d.mean)});
    worst = std::max(worst, serr);
    scale_bad += serr > 1e-6;
  }
  o.require(range_bad == 0, "diversity mean in (0,1] on 1000 random maps");
  o.require(oracle_bad == 0, "1000 random maps match loop oracles to 1e-6");
  o.require(scale_bad == 0, fmt("scale/affine invariance, worst %.2e <= 1e-6", worst));
  return o;
}

// ---- 7 ----------------------------------------------------------------
Outcome performance() {
  Outcome o;
  bench::BenchOptions opts;
  const auto large = bench::bench_one({64, 5, 5, 29, 29, 64}, opts);
  o.require(large.naive_ns > large.acm_ns,
            fmt("C=64 5x5 29x29 P=64: naive %.0f ns", large.naive_ns) + fmt(" > acm %.0f ns", large.acm_ns));

  bench::BenchOptions many = opts;
  many.reps = 41;
  const auto sweep = bench::naive_cost_sweep(64, 5, 64, {3, 6, 12, 24}, many);
  o.require(sweep.slope >= 0.9, fmt("naive log-log slope %.3f >= 0.9", sweep.slope));

  // at 64,5,5,29,29,64 caching skips ~0.2% of the work, below timer noise;
  // the ordering is asserted where the skipped template/prior work is a
  // measurable share
  many.reps = 101;
  for (const bench::BenchConfig& c : {bench::BenchConfig{32, 3, 3, 4, 4, 32}, bench::BenchConfig{64, 5, 5, 5, 5, 64}}) {
    const auto r = bench::bench_one(c, many);
    char what[160];
    std::snprintf(what, sizeof what, "C=%zu %zux%zu %zux%zu P=%zu with prior: cached %.0f ns < uncached %.0f ns", c.C,
                  c.eta, c.omega, c.H, c.W, c.P, r.cached_ns, r.acm_ns);
    o.require(r.cached_ns < r.acm_ns, what);
  }
  o.detail += fmt("; (64,5,5,29,29,64 cached %.0f ns,", large.cached_ns) + fmt(" uncached %.0f ns, informational)", large.acm_ns);
  return o;
}

// ---- 8 ----------------------------------------------------------------
Outcome determinism_formats() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "acm_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Pcg32 rng(8, streams::inputs);
  Tensor t = random_uniform({3, 7, 5, 2}, rng, -1e6f, 1e6f);
  const std::uint32_t special[] = {0x7fc00001u, 0x80000000u, 0x00000001u, 0x7f800000u, 0xff7fffffu};
  std::memcpy(t.ptr(), special, sizeof special);
  tensor_write(t, dir / "t.tsr");
  const Tensor back = tensor_read(dir / "t.tsr");
  o.require(back.shape() == t.shape() && std::memcmp(back.ptr(), t.ptr(), t.numel() * sizeof(float)) == 0,
            "TSR round trip bit-exact");

  auto export_seeded = [&](const std::string& name) {
    Pcg32 r(99, streams::inputs);
    heatmap_export(random_uniform({6, 9, 11}, r), dir / name);
  };
  export_seeded("a");
  export_seeded("b");
  o.require(slurp(dir / "a.csv") == slurp(dir / "b.csv") && slurp(dir / "a.pgm") == slurp(dir / "b.pgm"),
            "identical seeds give byte-identical CSV/PGM");

  auto curves = [] {
    toy::TrainConfig c;
    c.n_train = 200;
    c.n_test = 50;
    c.epochs = 2;
    const auto r = toy::toy_train(c);
    std::ostringstream os;
    for (double v : r.train_curve) os << fmt("%.17g\n", v);
    return os.str();
  };
  o.require(curves() == curves(), "identical seeds give identical training curves");

  heatmap_export(Tensor::from({1, 2, 2}, {0, 1, 2, 3}), dir / "spot");
  const std::string pgm = slurp(dir / "spot.pgm");
  o.require(pgm == std::string("P5\n2 2\n255\n") + std::string("\x00\x55\xaa\xff", 4), "PGM [0,1;2,3] -> [0,85,170,255]");
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"equivalence", equivalence},
      {"shape law", shape_law},
      {"gradient suite", gradients},
      {"prior-fusion toy experiment", toy_experiment},
      {"fusion-response locality", locality},
      {"analysis protocol", analysis_protocol},
      {"performance ordering", performance},
      {"determinism and formats", determinism_formats},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("criterion %zu %s %s (%.1f s): %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed ? 1 : 0;
}
