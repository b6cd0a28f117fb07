#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "acm/tensor.hpp"

namespace acm {

struct GridPos {
  std::size_t row = 0, col = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

// Inclusive box [r0, r1] x [c0, c1] on the map grid.
struct ExcludeBox {
  std::size_t r0 = 0, c0 = 0, r1 = 0, c1 = 0;
  bool contains(std::size_t r, std::size_t c) const { return r >= r0 && r <= r1 && c >= c0 && c <= c1; }
};

enum class NormScope { joint, per_channel };

struct DiscriminabilityReport {
  // Empty when the target or distractor vector is all zeros.
  std::optional<double> cosine;
  double euclidean_norm01 = 0.0;
  GridPos target_pos;
  GridPos distractor_pos;
};

struct ChannelDiversity {
  std::vector<double> per_channel_max_normalized;
  double mean = 0.0;
};

// Distractor = argmax of the channel-L1 map over positions outside `exclude`
// (first in row-major order on ties). Cosine on raw vectors; Euclidean on
// the map after min-max scaling to [0, 1].
DiscriminabilityReport discriminability(const Tensor& corr, GridPos target, const ExcludeBox& exclude,
                                        NormScope scope = NormScope::joint);

// Channel maxima divided by the global maximum, then averaged. Channels whose
// maximum is negative count as 0. NonPositiveMax when the global max <= 0.
ChannelDiversity channel_diversity(const Tensor& corr);

// Min-max scaling of the whole tensor (or each leading-axis slice) to
// [0, 1]; constant ranges map to 0.
Tensor minmax_normalize(const Tensor& t, NormScope scope);

// 8-bit grayscale from min-max scaling; a constant map gives all zeros.
std::vector<unsigned char> to_gray8(const Tensor& map2d);

// l1_map(corr) written as <prefix>.csv and <prefix>.pgm (binary P5).
void heatmap_export(const Tensor& corr, const std::filesystem::path& prefix);

void write_csv_matrix(const Tensor& map2d, const std::filesystem::path& path);
Tensor read_csv_matrix(const std::filesystem::path& path);
void write_pgm(const Tensor& map2d, const std::filesystem::path& path);

}  // namespace acm
