#include "acm/analysis.hpp"
#include "helpers.hpp"

using namespace acm;
using testing::rand_tensor;

namespace {

// ch0 = [1 0 0; 0 5 0; 0 0 2], ch1 = [0 3 0; 0 4 0; 1 0 -2]
Tensor crafted() {
  return Tensor::from({2, 3, 3}, {1, 0, 0, 0, 5, 0, 0, 0, 2,  //
                                  0, 3, 0, 0, 4, 0, 1, 0, -2});
}

struct Oracle {
  GridPos distractor;
  double cosine, euclid;
};

// Straight loops over the definition: exterior argmax of the channel L1,
// cosine of raw columns, distance of jointly min-max normalised columns.
Oracle loop_oracle(const Tensor& t, GridPos tgt, ExcludeBox box) {
  const std::size_t N = t.dim(0), H = t.dim(1), W = t.dim(2);
  double best = -1;
  GridPos d{};
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      if (r >= box.r0 && r <= box.r1 && c >= box.c0 && c <= box.c1) continue;
      double s = 0;
      for (std::size_t n = 0; n < N; ++n) s += std::fabs(double(t.at(n, r, c)));
      if (s > best) {
        best = s;
        d = {r, c};
      }
    }
  double lo = 1e300, hi = -1e300;
  for (auto v : t.data()) {
    lo = std::min(lo, double(v));
    hi = std::max(hi, double(v));
  }
  double dot = 0, na = 0, nb = 0, ss = 0;
  for (std::size_t n = 0; n < N; ++n) {
    const double a = t.at(n, tgt.row, tgt.col), b = t.at(n, d.row, d.col);
    dot += a * b;
    na += a * a;
    nb += b * b;
    const double e = (a - lo) / (hi - lo) - (b - lo) / (hi - lo);
    ss += e * e;
  }
  return {d, dot / std::sqrt(na * nb), std::sqrt(ss)};
}

double diversity_oracle(const Tensor& t) {
  const std::size_t N = t.dim(0), plane = t.dim(1) * t.dim(2);
  std::vector<double> m(N, -1e300);
  double g = -1e300;
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t i = 0; i < plane; ++i) m[n] = std::max(m[n], double(t[n * plane + i]));
    g = std::max(g, m[n]);
  }
  double s = 0;
  for (auto v : m) s += std::max(v, 0.0) / g;
  return s / N;
}

}  // namespace

TEST_CASE("discriminability on the 2x3x3 hand example") {
  const auto rep = discriminability(crafted(), {1, 1}, {1, 1, 1, 1});
  // exterior L1: (0,1)=3, (2,2)=4 is the largest
  CHECK(rep.distractor_pos == GridPos{2, 2});
  CHECK(rep.target_pos == GridPos{1, 1});
  // target (5,4), distractor (2,-2): cos = 2 / sqrt(41 * 8)
  REQUIRE(rep.cosine.has_value());
  CHECK(std::fabs(*rep.cosine - 2.0 / std::sqrt(328.0)) <= 1e-6);
  // joint range [-2,5]: (1, 6/7) vs (4/7, 0) -> sqrt(45)/7
  CHECK(std::fabs(rep.euclidean_norm01 - std::sqrt(45.0) / 7.0) <= 1e-6);

  // per channel: ch0 [0,5] -> (1, 0.4); ch1 [-2,4] -> (1, 0)
  const auto pc = discriminability(crafted(), {1, 1}, {1, 1, 1, 1}, NormScope::per_channel);
  CHECK(std::fabs(pc.euclidean_norm01 - std::sqrt(1.36)) <= 1e-6);
  CHECK(*pc.cosine == *rep.cosine);
}

TEST_CASE("channel_diversity on the 2x3x3 hand example") {
  const auto d = channel_diversity(crafted());
  CHECK(d.per_channel_max_normalized == std::vector<double>{1.0, 0.8});
  CHECK(std::fabs(d.mean - 0.9) <= 1e-12);
}

TEST_CASE("crafted 8x5x5 map") {
  // channel c peaks at c+1 on the diagonal cell (c%5, c%5); channel 7 is all negative
  Tensor t({8, 5, 5});
  for (std::size_t c = 0; c < 7; ++c) t.at(c, c % 5, c % 5) = float(c + 1);
  for (std::size_t i = 0; i < 25; ++i) t[7 * 25 + i] = -1.0f;
  const auto d = channel_diversity(t);
  for (std::size_t c = 0; c < 7; ++c) CHECK(std::fabs(d.per_channel_max_normalized[c] - (c + 1) / 7.0) <= 1e-12);
  CHECK(d.per_channel_max_normalized[7] == 0.0);
  CHECK(std::fabs(d.mean - 0.5) <= 1e-6);

  // exterior L1: 1 everywhere from channel 7, (0,0) adds 1+6, (4,4) adds 5
  const auto rep = discriminability(t, {2, 2}, {1, 1, 3, 3});
  const auto o = loop_oracle(t, {2, 2}, {1, 1, 3, 3});
  CHECK(rep.distractor_pos == GridPos{0, 0});
  CHECK(std::fabs(*rep.cosine - 1.0 / std::sqrt(10.0 * 38.0)) <= 1e-6);
  CHECK(rep.distractor_pos == o.distractor);
  CHECK(std::fabs(*rep.cosine - o.cosine) <= 1e-6);
  CHECK(std::fabs(rep.euclidean_norm01 - o.euclid) <= 1e-6);
}

TEST_CASE("random maps match the loop oracles") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto t = rand_tensor({8, 5, 5}, 1000 + s);
    Pcg32 rng(s, 1);
    const std::size_t r0 = rng.below(5), c0 = rng.below(5);
    const ExcludeBox box{r0, c0, r0 + rng.below(unsigned(5 - r0)), c0 + rng.below(unsigned(5 - c0))};
    if (box.r0 == 0 && box.c0 == 0 && box.r1 == 4 && box.c1 == 4) continue;
    const GridPos tgt{rng.below(5), rng.below(5)};
    const auto rep = discriminability(t, tgt, box);
    const auto o = loop_oracle(t, tgt, box);
    CHECK(rep.distractor_pos == o.distractor);
    CHECK(!box.contains(rep.distractor_pos.row, rep.distractor_pos.col));
    CHECK(std::fabs(*rep.cosine - o.cosine) <= 1e-6);
    CHECK(std::fabs(rep.euclidean_norm01 - o.euclid) <= 1e-6);
    CHECK(std::fabs(channel_diversity(t).mean - diversity_oracle(t)) <= 1e-6);
  }
}

TEST_CASE("identical and orthogonal columns") {
  Tensor t({3, 2, 2});
  const float v[] = {0.5f, -1.0f, 2.0f};
  for (std::size_t c = 0; c < 3; ++c) {
    t.at(c, 0, 0) = v[c];
    t.at(c, 1, 1) = v[c];
  }
  const auto same = discriminability(t, {0, 0}, {0, 0, 0, 0});
  CHECK(same.distractor_pos == GridPos{1, 1});
  CHECK(*same.cosine == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(same.euclidean_norm01 == 0.0);

  Tensor o({3, 1, 2});
  o.at(0, 0, 0) = 1;
  o.at(1, 0, 1) = 1;
  CHECK(*discriminability(o, {0, 0}, {0, 0, 0, 0}).cosine == 0.0);
}

TEST_CASE("ties break row-major") {
  Tensor t({1, 3, 3});
  t.at(0, 0, 2) = 4;
  t.at(0, 2, 0) = 4;
  t.at(0, 1, 1) = 1;
  CHECK(discriminability(t, {1, 1}, {1, 1, 1, 1}).distractor_pos == GridPos{0, 2});
  const auto a = discriminability(t, {1, 1}, {0, 2, 0, 2});
  CHECK(a.distractor_pos == GridPos{2, 0});
}

TEST_CASE("degenerate inputs") {
  CHECK_ERROR_CODE(discriminability(crafted(), {0, 0}, {0, 0, 2, 2}), ErrorCode::empty_exterior);
  CHECK_ERROR_CODE(discriminability(crafted(), {3, 0}, {0, 0, 0, 0}), ErrorCode::invalid_argument);
  CHECK_ERROR_CODE(discriminability(crafted(), {0, 0}, {0, 0, 3, 0}), ErrorCode::invalid_argument);
  CHECK_ERROR_CODE(discriminability(Tensor({3, 3}), {0, 0}, {0, 0, 0, 0}), ErrorCode::rank_error);

  // zero target column: flagged, not thrown
  Tensor z = crafted();
  z.at(0, 1, 1) = 0;
  z.at(1, 1, 1) = 0;
  const auto rep = discriminability(z, {1, 1}, {1, 1, 1, 1});
  CHECK(!rep.cosine.has_value());
  CHECK(rep.euclidean_norm01 >= 0.0);

  CHECK_ERROR_CODE(channel_diversity(Tensor::full({2, 2, 2}, -1)), ErrorCode::non_positive_max);
  CHECK_ERROR_CODE(channel_diversity(Tensor({2, 2, 2})), ErrorCode::non_positive_max);
}

TEST_CASE("channel_diversity examples") {
  Tensor same({3, 2, 2});
  for (std::size_t c = 0; c < 3; ++c) same.at(c, c % 2, 1) = 2.5f;
  CHECK(channel_diversity(same).mean == 1.0);

  Tensor one({5, 2, 2});
  one.at(3, 1, 0) = 7;
  CHECK(channel_diversity(one).mean == doctest::Approx(0.2));
}

TEST_CASE("diversity mean in (0,1] and equals 1 iff all channels hit the max") {
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto t = rand_tensor({1 + s % 8, 4, 4}, 5000 + s, -1.0f, 1.0f);
    double mx = 0;
    for (auto v : t.data()) mx = std::max(mx, double(v));
    if (mx <= 0) continue;
    const auto d = channel_diversity(t);
    CHECK(d.mean > 0.0);
    CHECK(d.mean <= 1.0);
    CHECK(*std::max_element(d.per_channel_max_normalized.begin(), d.per_channel_max_normalized.end()) == 1.0);
    bool all = true;
    for (auto v : d.per_channel_max_normalized) all = all && v == 1.0;
    CHECK((d.mean == 1.0) == all);
  }
}

TEST_CASE("scale invariance") {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto t = rand_tensor({6, 5, 5}, 9000 + s);
    Pcg32 rng(s, 2);
    // exact power-of-two scale; |b| <= a so the shifted input stays well resolved in f32
    const float a = std::ldexp(1.0f, static_cast<int>(rng.below(9)) - 4), b = a * rng.uniform(-1.0f, 1.0f);
    Tensor scaled(t.shape()), affine(t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i) {
      scaled[i] = a * t[i];
      affine[i] = a * t[i] + b;
    }
    const ExcludeBox box{1, 1, 3, 3};
    const auto r0 = discriminability(t, {2, 2}, box), r1 = discriminability(scaled, {2, 2}, box);
    CHECK(r0.distractor_pos == r1.distractor_pos);
    CHECK(std::fabs(*r0.cosine - *r1.cosine) <= 1e-6);
    CHECK(std::fabs(r0.euclidean_norm01 - r1.euclidean_norm01) <= 1e-6);

    // an affine shift can move the L1 argmax, so use a row map whose
    // exterior is the single cell (0,0)
    const auto row = t.reshaped({6, 1, 25});
    const auto arow = affine.reshaped({6, 1, 25});
    const ExcludeBox all_but_first{0, 1, 0, 24};
    const auto e0 = discriminability(row, {0, 12}, all_but_first);
    const auto e1 = discriminability(arow, {0, 12}, all_but_first);
    CHECK(std::fabs(e0.euclidean_norm01 - e1.euclidean_norm01) <= 1e-6);
    CHECK(std::fabs(channel_diversity(scaled).mean - channel_diversity(t).mean) <= 1e-6);
  }
}

TEST_CASE("heatmap export") {
  const auto dir = testing::scratch_dir("heatmap");
  heatmap_export(Tensor::from({1, 2, 2}, {0, 1, 2, 3}), dir / "m");
  const std::string pgm = testing::slurp(dir / "m.pgm");
  CHECK(pgm == std::string("P5\n2 2\n255\n") + std::string("\x00\x55\xaa\xff", 4));
  CHECK(testing::slurp(dir / "m.csv") == "0,1\n2,3\n");

  heatmap_export(Tensor::full({2, 3, 2}, 0.7f), dir / "flat");
  const std::string flat = testing::slurp(dir / "flat.pgm");
  CHECK(flat == std::string("P5\n2 3\n255\n") + std::string(6, '\0'));

  const auto t = rand_tensor({4, 6, 5}, 77);
  heatmap_export(t, dir / "r");
  const auto back = read_csv_matrix(dir / "r.csv");
  const auto l1 = l1_map(t);
  REQUIRE(back.shape() == l1.shape());
  CHECK(testing::max_diff(back, l1) <= 1e-5);

  heatmap_export(t, dir / "r2");
  CHECK(testing::slurp(dir / "r.csv") == testing::slurp(dir / "r2.csv"));
  CHECK(testing::slurp(dir / "r.pgm") == testing::slurp(dir / "r2.pgm"));

  CHECK_ERROR_CODE(heatmap_export(t, "/nonexistent/dir/x"), ErrorCode::io_error);
  CHECK_ERROR_CODE(heatmap_export(Tensor({2, 2}), dir / "bad"), ErrorCode::rank_error);
}
