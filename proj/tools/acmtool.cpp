// acm: command-line front end for the fusion library.
//
// Exit codes: 0 success, 1 check failure, 2 usage or configuration error.

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acm/analysis.hpp"
#include "acm/bench.hpp"
#include "acm/eqcheck.hpp"
#include "acm/gradcheck.hpp"
#include "acm/toytask.hpp"
#include "acm/tsr_io.hpp"

namespace fs = std::filesystem;
using namespace acm;

namespace {

constexpr int kOk = 0, kCheckFailed = 1, kUsage = 2;

struct Globals {
  bool dump_config = false;
  int threads = 1;
};

struct EqArgs {
  long long trials = 100;
  std::uint64_t seed = 7;
  double tol = 1e-4;
};

struct GradArgs {
  std::uint64_t seed = 7;
  double eps = 1e-2;
  double tol = 1e-2;
  bool inject_fault = false;
};

struct BenchArgs {
  std::string configs;
  std::size_t reps = 20;
  std::string out;
};

struct ToyArgs {
  std::uint64_t seed = 1;
  std::size_t classes = 4;
  std::size_t epochs = toy::TrainConfig{}.epochs;
  float lr = toy::TrainConfig{}.lr;
  bool ablate_index = false;
  std::string out_dir;
};

struct AnalyzeArgs {
  std::string map;
  std::vector<std::size_t> target;
  std::vector<std::size_t> exclude;
  bool per_channel_norm = false;
};

struct HeatmapArgs {
  std::string map;
  std::string out;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void print_config(const std::string& cmd, const std::vector<std::pair<std::string, std::string>>& kv, const Globals& g) {
  std::printf("config: command=%s", cmd.c_str());
  for (const auto& [k, v] : kv) std::printf(" %s=%s", k.c_str(), v.c_str());
  std::printf(" threads=%d\n", g.threads);
  std::fflush(stdout);
}

int cmd_eqcheck(const EqArgs& a, const Globals& g) {
  print_config("eqcheck", {{"trials", std::to_string(a.trials)}, {"seed", std::to_string(a.seed)}, {"tol", fmt(a.tol)}}, g);
  if (a.trials < 1) {
    std::fprintf(stderr, "error: --trials must be >= 1\n");
    return kUsage;
  }
  if (!(a.tol >= 0.0)) {
    std::fprintf(stderr, "error: --tol must be >= 0\n");
    return kUsage;
  }
  if (g.dump_config) return kOk;

  const auto trials = run_eqcheck(static_cast<std::size_t>(a.trials), a.seed, g.threads > 1 ? Exec::parallel : Exec::sequential);
  float worst = 0.0f;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    const bool ok = t.max_diff <= a.tol;
    bad += !ok;
    worst = std::max(worst, t.max_diff);
    std::printf("trial %zu C=%zu eta=%zu omega=%zu H=%zu W=%zu P=%zu max_abs_diff=%.3e %s\n", i, t.shape.C, t.shape.eta,
                t.shape.omega, t.shape.H, t.shape.W, t.shape.P, static_cast<double>(t.max_diff), ok ? "ok" : "FAIL");
  }
  std::printf("eqcheck: %zu/%zu trials within tol %s, worst %.3e\n", trials.size() - bad, trials.size(), fmt(a.tol).c_str(),
              static_cast<double>(worst));
  return bad ? kCheckFailed : kOk;
}

int cmd_gradcheck(const GradArgs& a, const Globals& g) {
  print_config("gradcheck",
               {{"seed", std::to_string(a.seed)}, {"eps", fmt(a.eps)}, {"tol", fmt(a.tol)},
                {"inject_fault", a.inject_fault ? "true" : "false"}},
               g);
  if (!(a.eps > 0.0) || !(a.tol > 0.0)) {
    std::fprintf(stderr, "error: --eps and --tol must be > 0\n");
    return kUsage;
  }
  if (g.dump_config) return kOk;

  ag::GradCheckOptions opts;
  opts.eps = a.eps;
  opts.tol = a.tol;
  if (a.inject_fault) opts.corrupt_scale = 1.5;
  const auto results = ag::run_gradcheck_suite(a.seed, opts);
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    std::printf("%-16s max_rel_err=%.3e checked=%zu skipped=%zu %s\n", r.name.c_str(), r.max_rel_error, r.checked,
                r.skipped, r.passed ? "ok" : "FAIL");
  }
  std::printf("gradcheck: %s\n", all ? "pass" : "FAIL");
  return all ? kOk : kCheckFailed;
}

int cmd_bench(const BenchArgs& a, const Globals& g) {
  print_config("bench",
               {{"configs", a.configs.empty() ? "(default C=64 eta=5 omega=5 H=29 W=29 P=64)" : a.configs},
                {"reps", std::to_string(a.reps)},
                {"out", a.out.empty() ? "(none)" : a.out}},
               g);
  if (a.reps < 20) {
    std::fprintf(stderr, "error: --reps must be >= 20\n");
    return kUsage;
  }
  std::vector<bench::BenchConfig> configs;
  if (a.configs.empty())
    configs.push_back({64, 5, 5, 29, 29, 64});
  else
    configs = bench::read_bench_configs(a.configs);
  if (g.dump_config) return kOk;

  // timings are single-threaded regardless of --threads
  omp_set_num_threads(1);
  bench::BenchOptions opts;
  opts.reps = a.reps;
  const auto results = bench::bench_compare(configs, opts);
  std::fputs(bench::bench_csv(results).c_str(), stdout);
  if (!a.out.empty()) bench::write_bench_csv(results, a.out);
  return kOk;
}

int cmd_toytrain(const ToyArgs& a, const Globals& g) {
  print_config("toytrain",
               {{"seed", std::to_string(a.seed)},
                {"classes", std::to_string(a.classes)},
                {"epochs", std::to_string(a.epochs)},
                {"lr", fmt(a.lr)},
                {"ablate_index", a.ablate_index ? "true" : "false"},
                {"out_dir", a.out_dir}},
               g);
  if (!(a.lr > 0.0f) || a.classes == 0) {
    std::fprintf(stderr, "error: --lr must be > 0 and --classes >= 1\n");
    return kUsage;
  }
  if (g.dump_config) return kOk;

  toy::TrainConfig cfg;
  cfg.seed = a.seed;
  cfg.classes = a.classes;
  cfg.model.classes = a.classes;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.ablate_index = a.ablate_index;
  auto r = toy::toy_train(cfg);

  fs::create_directories(a.out_dir);
  {
    std::ofstream curves(fs::path(a.out_dir) / "curves.csv", std::ios::binary | std::ios::trunc);
    if (!curves) fail(ErrorCode::io_error, "cannot write curves.csv in " + a.out_dir);
    curves << "epoch,train_loss\n";
    for (std::size_t e = 0; e < r.train_curve.size(); ++e) curves << e + 1 << ',' << fmt(r.train_curve[e]) << '\n';
  }
  for (const auto* p : r.model.parameters()) tensor_write(p->value, fs::path(a.out_dir) / (p->name + ".tsr"));

  for (std::size_t e = 0; e < r.train_curve.size(); ++e) std::printf("epoch %zu train_loss %.6f\n", e + 1, r.train_curve[e]);
  std::printf("test_accuracy %.4f\n", r.test_accuracy);
  if (!a.ablate_index) {
    Pcg32 rng(cfg.seed, streams::shuffle);
    std::vector<std::size_t> shuffled;
    for (std::size_t i = 0; i < r.test_set.size(); ++i) shuffled.push_back(rng.below(toy::kGridCells));
    std::printf("shuffled_index_accuracy %.4f\n", toy::toy_evaluate(r.model, r.test_set, &shuffled));
    std::printf("fusion_locality %.4f\n", toy::fusion_locality(r.model, r.test_set));
  }
  return kOk;
}

int cmd_analyze(const AnalyzeArgs& a, const Globals& g) {
  auto join = [](const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  print_config("analyze",
               {{"map", a.map}, {"target", join(a.target)}, {"exclude", join(a.exclude)},
                {"per_channel_norm", a.per_channel_norm ? "true" : "false"}},
               g);
  if (g.dump_config) return kOk;

  const Tensor corr = tensor_read(a.map);
  const ExcludeBox box{a.exclude[0], a.exclude[1], a.exclude[2], a.exclude[3]};
  const auto rep = discriminability(corr, {a.target[0], a.target[1]}, box,
                                    a.per_channel_norm ? NormScope::per_channel : NormScope::joint);
  const auto div = channel_diversity(corr);
  std::printf("cosine,euclidean_norm01,target_row,target_col,distractor_row,distractor_col,diversity_mean\n");
  std::printf("%s,%s,%zu,%zu,%zu,%zu,%s\n", rep.cosine ? fmt(*rep.cosine).c_str() : "", fmt(rep.euclidean_norm01).c_str(),
              rep.target_pos.row, rep.target_pos.col, rep.distractor_pos.row, rep.distractor_pos.col,
              fmt(div.mean).c_str());
  return kOk;
}

int cmd_heatmap(const HeatmapArgs& a, const Globals& g) {
  print_config("heatmap", {{"map", a.map}, {"out", a.out}}, g);
  if (g.dump_config) return kOk;
  heatmap_export(tensor_read(a.map), a.out);
  std::printf("wrote %s.csv %s.pgm\n", a.out.c_str(), a.out.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acm: asymmetric convolution fusion tools"};
  app.require_subcommand(1);
  Globals g;
  app.add_flag("--dump-config", g.dump_config, "print the resolved configuration and exit");
  app.add_option("--threads", g.threads, "worker threads for parallel-capable commands")->check(CLI::Range(1, 1024));

  EqArgs eq;
  auto* eqc = app.add_subcommand("eqcheck", "compare the decomposed fusion against the concatenation oracle");
  eqc->add_option("--trials", eq.trials, "number of random shapes")->capture_default_str();
  eqc->add_option("--seed", eq.seed)->capture_default_str();
  eqc->add_option("--tol", eq.tol, "max abs diff allowed")->capture_default_str();

  GradArgs gr;
  auto* grc = app.add_subcommand("gradcheck", "analytic vs central-difference gradients");
  grc->add_option("--seed", gr.seed)->capture_default_str();
  grc->add_option("--eps", gr.eps)->capture_default_str();
  grc->add_option("--tol", gr.tol)->capture_default_str();
  grc->add_flag("--inject-fault", gr.inject_fault, "scale analytic gradients by 1.5 (negative control)");

  BenchArgs be;
  auto* bec = app.add_subcommand("bench", "time naive, decomposed and cached fusion");
  bec->add_option("--configs", be.configs, "CSV with header C,eta,omega,H,W,P");
  bec->add_option("--reps", be.reps)->capture_default_str();
  bec->add_option("--out", be.out, "result CSV");

  ToyArgs ty;
  auto* tyc = app.add_subcommand("toytrain", "train the indexed glyph-grid model");
  tyc->add_option("--seed", ty.seed)->capture_default_str();
  tyc->add_option("--classes", ty.classes)->capture_default_str();
  tyc->add_option("--epochs", ty.epochs)->capture_default_str();
  tyc->add_option("--lr", ty.lr)->capture_default_str();
  tyc->add_flag("--ablate-index", ty.ablate_index, "zero the index branch output");
  tyc->add_option("--out-dir", ty.out_dir, "curves.csv and parameter .tsr files")->required();

  AnalyzeArgs an;
  auto* anc = app.add_subcommand("analyze", "discriminability and channel diversity of a correlation map");
  anc->add_option("--map", an.map, "[C,H,W] tensor file")->required()->check(CLI::ExistingFile);
  anc->add_option("--target", an.target, "r,c")->required()->delimiter(',')->expected(2);
  anc->add_option("--exclude", an.exclude, "r0,c0,r1,c1 (inclusive)")->required()->delimiter(',')->expected(4);
  anc->add_flag("--per-channel-norm", an.per_channel_norm);

  HeatmapArgs hm;
  auto* hmc = app.add_subcommand("heatmap", "channel-L1 heatmap as CSV and PGM");
  hmc->add_option("--map", hm.map, "[C,H,W] tensor file")->required()->check(CLI::ExistingFile);
  hmc->add_option("--out", hm.out, "output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  omp_set_num_threads(g.threads);

  try {
    if (eqc->parsed()) return cmd_eqcheck(eq, g);
    if (grc->parsed()) return cmd_gradcheck(gr, g);
    if (bec->parsed()) return cmd_bench(be, g);
    if (tyc->parsed()) return cmd_toytrain(ty, g);
    if (anc->parsed()) return cmd_analyze(an, g);
    if (hmc->parsed()) return cmd_heatmap(hm, g);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::check_failed ? kCheckFailed : kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  }
  return kUsage;
}
