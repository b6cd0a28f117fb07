#pragma once

// Position-conditioned glyph classification: a 2x2 grid of glyphs plus a
// query index (0, 1 top row; 2, 3 bottom row); the model must name the glyph
// at the queried cell. The index enters only through a three-layer FC
// branch whose [P,1,1] output is broadcast-added to the visual response,
// i.e. the prior term of the asymmetric convolution.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "acm/autograd.hpp"

namespace acm::toy {

inline constexpr std::size_t kGridCells = 4;
inline constexpr std::size_t kMaxClasses = 8;
inline constexpr std::size_t kGlyphBase = 5;  // native bitmap side

struct GridSample {
  Tensor image;  // [1, G, G], G = 2 * glyph_size, values in [0, 1]
  std::size_t index = 0;
  std::size_t label = 0;
  std::array<std::uint8_t, kGridCells> cells{};  // class drawn in each cell
};

enum class Split { train, test };

struct DatasetConfig {
  std::uint64_t seed = 1;
  std::size_t n = 100;
  std::size_t classes = 4;
  std::size_t glyph_size = 7;
  float noise_std = 0.1f;
  Split split = Split::train;
};

// The built-in 5x5 bitmap for `cls`, nearest-neighbour scaled to `size`.
std::vector<float> render_glyph(std::size_t cls, std::size_t size);

// Sample i draws from its own Pcg32 stream, so the result does not depend on
// Exec. TooManyClasses when classes > kMaxClasses.
std::vector<GridSample> gen_dataset(const DatasetConfig& cfg, Exec exec = Exec::sequential);

// <dir>/manifest.csv (id,index,label) plus <dir>/<id>.tsr per image.
void export_dataset(const std::vector<GridSample>& samples, const std::filesystem::path& dir);
std::vector<GridSample> import_dataset(const std::filesystem::path& dir);

struct ModelConfig {
  std::size_t classes = 4;
  std::size_t glyph_size = 7;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t fused_channels = 16;  // P
  std::size_t index_hidden = 32;
  std::size_t fusion_kernel = 3;
};

// Backbone input is the grey image plus two coordinate planes (row and
// column in [-1, 1], multiplied by the pixel value). Without them valid
// convolutions are translation equivariant and no per-channel offset could
// single out a cell.
inline constexpr std::size_t kInputChannels = 3;

struct ToyModel {
  ModelConfig config;
  ag::Parameter conv1;        // [C1, 3, 3, 3]
  ag::Parameter conv2;        // [C2, C1, 3, 3]
  ag::Mlp3Params index_branch;  // one-hot(4) -> P
  ag::Parameter theta_x;      // [P, C2, k, k]
  ag::FcParams head;          // P -> K
  bool ablate_index = false;  // index branch output forced to zero

  static ToyModel init(const ModelConfig& cfg, std::uint64_t seed);
  std::vector<ag::Parameter*> parameters();
  std::vector<const ag::Parameter*> parameters() const;
};

Tensor backbone_input(const Tensor& image);
Tensor one_hot_index(std::size_t index);

struct ToyGraph {
  ag::Var logits;
  ag::Var fused;  // post-ReLU [P, H', W']
};

ToyGraph toy_graph(ag::Graph& g, ToyModel& model, const Tensor& image, std::size_t index);

struct ToyOutput {
  Tensor logits;  // [K]
  Tensor fused;   // [P, H', W']
};

// Graph-free forward for evaluation; matches toy_graph bit for bit.
ToyOutput toy_forward(const ToyModel& model, const Tensor& image, std::size_t index);
inline Tensor toy_forward(const ToyModel& model, const GridSample& s) { return toy_forward(model, s.image, s.index).logits; }

std::size_t argmax(std::span<const float> v);  // lowest index on ties

// Fraction of rows whose argmax equals the label. EmptyDataset on no rows.
double accuracy(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels);

// Accuracy of the model on `samples`. `indices`, when given, replaces each
// sample's query index. EmptyDataset on no samples.
double toy_evaluate(const ToyModel& model, const std::vector<GridSample>& samples,
                    const std::vector<std::size_t>* indices = nullptr);

// Fraction of samples whose queried cell holds the largest quadrant sum of
// the channel-L1 map of the fused response.
double fusion_locality(const ToyModel& model, const std::vector<GridSample>& samples);

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::size_t classes = 4;
  std::size_t glyph_size = 7;
  float noise_std = 0.1f;
  std::size_t epochs = 20;
  float lr = 0.02f;
  bool ablate_index = false;
  ModelConfig model{};
};

struct TrainResult {
  std::vector<double> train_curve;  // mean loss per epoch
  double test_accuracy = 0.0;
  ToyModel model;
  std::vector<GridSample> test_set;
};

TrainResult toy_train(const TrainConfig& cfg);

}  // namespace acm::toy
