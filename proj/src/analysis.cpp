#include "acm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace acm {

namespace {

void require_rank3(const Tensor& t, const char* what) {
  if (t.rank() != 3) fail(ErrorCode::rank_error, std::string(what) + " expects [N,H,W], got " + shape_str(t.shape()));
}

std::vector<float> column(const Tensor& t, GridPos p) {
  std::vector<float> v(t.dim(0));
  for (std::size_t c = 0; c < v.size(); ++c) v[c] = t.at(c, p.row, p.col);
  return v;
}

bool is_zero(const std::vector<float>& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

// (min, max - min) of the whole tensor or of each leading-axis slice.
std::vector<std::pair<double, double>> value_ranges(const Tensor& t, NormScope scope) {
  const std::size_t groups = scope == NormScope::per_channel ? t.dim(0) : 1;
  const std::size_t len = t.numel() / groups;
  std::vector<std::pair<double, double>> out(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const auto first = t.data().begin() + static_cast<std::ptrdiff_t>(g * len);
    const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(len));
    out[g] = {*lo, static_cast<double>(*hi) - *lo};
  }
  return out;
}

}  // namespace

Tensor minmax_normalize(const Tensor& t, NormScope scope) {
  Tensor out(t.shape());
  const auto ranges = value_ranges(t, scope);
  const std::size_t len = t.numel() / ranges.size();
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const auto [lo, range] = ranges[i / len];
    out[i] = range > 0.0 ? static_cast<float>((t[i] - lo) / range) : 0.0f;
  }
  return out;
}

DiscriminabilityReport discriminability(const Tensor& corr, GridPos target, const ExcludeBox& exclude,
                                        NormScope scope) {
  require_rank3(corr, "discriminability");
  const std::size_t H = corr.dim(1), W = corr.dim(2);
  if (target.row >= H || target.col >= W) fail(ErrorCode::invalid_argument, "target position outside the map");
  if (exclude.r0 > exclude.r1 || exclude.c0 > exclude.c1 || exclude.r1 >= H || exclude.c1 >= W)
    fail(ErrorCode::invalid_argument, "exclude box outside the map or inverted");

  const Tensor l1 = l1_map(corr);
  std::optional<GridPos> best;
  float best_val = 0.0f;
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      if (exclude.contains(r, c)) continue;
      const float v = l1[r * W + c];
      if (!best || v > best_val) {
        best = GridPos{r, c};
        best_val = v;
      }
    }
  if (!best) fail(ErrorCode::empty_exterior, "exclude box covers the whole map");

  DiscriminabilityReport rep;
  rep.target_pos = target;
  rep.distractor_pos = *best;

  const auto tv = column(corr, target), dv = column(corr, *best);
  if (!is_zero(tv) && !is_zero(dv)) rep.cosine = cosine_similarity(tv, dv);

  // min-max scaling cancels to (t - d) / range; kept in f64
  const auto ranges = value_ranges(corr, scope);
  double ss = 0.0;
  for (std::size_t c = 0; c < tv.size(); ++c) {
    const double range = ranges[ranges.size() == 1 ? 0 : c].second;
    const double d = range > 0.0 ? (static_cast<double>(tv[c]) - dv[c]) / range : 0.0;
    ss += d * d;
  }
  rep.euclidean_norm01 = std::sqrt(ss);
  return rep;
}

ChannelDiversity channel_diversity(const Tensor& corr) {
  require_rank3(corr, "channel_diversity");
  const std::size_t N = corr.dim(0), plane = corr.dim(1) * corr.dim(2);
  std::vector<double> maxima(N);
  for (std::size_t c = 0; c < N; ++c) {
    const auto first = corr.data().begin() + static_cast<std::ptrdiff_t>(c * plane);
    maxima[c] = *std::max_element(first, first + static_cast<std::ptrdiff_t>(plane));
  }
  const double global = *std::max_element(maxima.begin(), maxima.end());
  if (!(global > 0.0)) fail(ErrorCode::non_positive_max, "global maximum is not positive");

  ChannelDiversity out;
  out.per_channel_max_normalized.resize(N);
  double sum = 0.0;
  for (std::size_t c = 0; c < N; ++c) {
    out.per_channel_max_normalized[c] = std::max(0.0, maxima[c] / global);
    sum += out.per_channel_max_normalized[c];
  }
  out.mean = sum / static_cast<double>(N);
  return out;
}

std::vector<unsigned char> to_gray8(const Tensor& map2d) {
  const Tensor n = minmax_normalize(map2d, NormScope::joint);
  std::vector<unsigned char> px(n.numel());
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<unsigned char>(std::lround(static_cast<double>(n[i]) * 255.0));
  return px;
}

void write_csv_matrix(const Tensor& map2d, const std::filesystem::path& path) {
  if (map2d.rank() != 2) fail(ErrorCode::rank_error, "CSV export expects a 2-D map");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path.string());
  char buf[32];
  for (std::size_t r = 0; r < map2d.dim(0); ++r) {
    for (std::size_t c = 0; c < map2d.dim(1); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(map2d[r * map2d.dim(1) + c]));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
  if (!out) fail(ErrorCode::io_error, "write failed for " + path.string());
}

Tensor read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
  std::vector<float> values;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t n = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stof(cell));
      ++n;
    }
    if (rows == 0) cols = n;
    if (n != cols) fail(ErrorCode::format_error, "ragged CSV row in " + path.string());
    ++rows;
  }
  if (rows == 0) fail(ErrorCode::format_error, "empty CSV " + path.string());
  return Tensor({rows, cols}, std::move(values));
}

void write_pgm(const Tensor& map2d, const std::filesystem::path& path) {
  if (map2d.rank() != 2) fail(ErrorCode::rank_error, "PGM export expects a 2-D map");
  const auto px = to_gray8(map2d);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path.string());
  out << "P5\n" << map2d.dim(1) << ' ' << map2d.dim(0) << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) fail(ErrorCode::io_error, "write failed for " + path.string());
}

void heatmap_export(const Tensor& corr, const std::filesystem::path& prefix) {
  require_rank3(corr, "heatmap_export");
  const Tensor l1 = l1_map(corr);
  write_csv_matrix(l1, prefix.string() + ".csv");
  write_pgm(l1, prefix.string() + ".pgm");
}

}  // namespace acm
