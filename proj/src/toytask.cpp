#include "acm/toytask.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "acm/tsr_io.hpp"

namespace acm::toy {

namespace {

// 5x5 bitmaps, '#' = 1. Digit-like shapes 0..7.
constexpr const char* kGlyphs[kMaxClasses][kGlyphBase] = {
    {".###.", "#...#", "#...#", "#...#", ".###."},
    {"..#..", ".##..", "..#..", "..#..", ".###."},
    {"####.", "....#", ".###.", "#....", "#####"},
    {"####.", "....#", ".###.", "....#", "####."},
    {"#..#.", "#..#.", "#####", "...#.", "...#."},
    {"#####", "#....", "####.", "....#", "####."},
    {".###.", "#....", "####.", "#...#", ".###."},
    {"#####", "....#", "...#.", "..#..", "..#.."},
};

GridSample make_sample(const DatasetConfig& cfg, std::size_t i) {
  const std::uint64_t stream = cfg.split == Split::train ? streams::train_sample(i) : streams::test_sample(i);
  Pcg32 rng(cfg.seed, stream);
  const std::size_t gs = cfg.glyph_size, G = 2 * gs;

  GridSample s;
  for (auto& c : s.cells) c = static_cast<std::uint8_t>(rng.below(static_cast<std::uint32_t>(cfg.classes)));
  s.index = rng.below(kGridCells);
  s.label = s.cells[s.index];

  s.image = Tensor({1, G, G});
  for (std::size_t q = 0; q < kGridCells; ++q) {
    const auto glyph = render_glyph(s.cells[q], gs);
    const std::size_t r0 = (q / 2) * gs, c0 = (q % 2) * gs;
    for (std::size_t y = 0; y < gs; ++y)
      for (std::size_t x = 0; x < gs; ++x) s.image.at(0, r0 + y, c0 + x) = glyph[y * gs + x];
  }
  if (cfg.noise_std > 0.0f) {
    std::normal_distribution<float> noise(0.0f, cfg.noise_std);
    for (auto& v : s.image.data()) v = std::clamp(v + noise(rng), 0.0f, 1.0f);
  }
  return s;
}

Tensor zero_prior(std::size_t P) { return Tensor({P, 1, 1}); }

void check_image(const ToyModel& model, const Tensor& image) {
  const std::size_t G = 2 * model.config.glyph_size;
  if (image.shape() != Shape{1, G, G})
    fail(ErrorCode::shape_mismatch, "image " + shape_str(image.shape()) + " does not match model grid " +
                                        shape_str({1, G, G}));
}

}  // namespace

std::vector<float> render_glyph(std::size_t cls, std::size_t size) {
  if (cls >= kMaxClasses) fail(ErrorCode::too_many_classes, "no glyph for class " + std::to_string(cls));
  std::vector<float> out(size * size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      out[y * size + x] = kGlyphs[cls][y * kGlyphBase / size][x * kGlyphBase / size] == '#' ? 1.0f : 0.0f;
  return out;
}

std::vector<GridSample> gen_dataset(const DatasetConfig& cfg, Exec exec) {
  if (cfg.classes > kMaxClasses)
    fail(ErrorCode::too_many_classes, std::to_string(cfg.classes) + " classes, at most " + std::to_string(kMaxClasses));
  if (cfg.classes == 0) fail(ErrorCode::invalid_argument, "need at least one class");
  if (cfg.glyph_size < kGlyphBase) fail(ErrorCode::invalid_argument, "glyph_size must be >= 5");
  if (!(cfg.noise_std >= 0.0f)) fail(ErrorCode::invalid_argument, "noise_std must be >= 0");

  std::vector<GridSample> out(cfg.n);
  const auto n = static_cast<std::ptrdiff_t>(cfg.n);
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = make_sample(cfg, static_cast<std::size_t>(i));
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = make_sample(cfg, static_cast<std::size_t>(i));
  }
  return out;
}

void export_dataset(const std::vector<GridSample>& samples, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io_error, "cannot create " + dir.string());
  std::ofstream manifest(dir / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!manifest) fail(ErrorCode::io_error, "cannot write manifest in " + dir.string());
  manifest << "id,index,label\n";
  char name[32];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(name, sizeof name, "%06zu.tsr", i);
    tensor_write(samples[i].image, dir / name);
    manifest << i << ',' << samples[i].index << ',' << samples[i].label << '\n';
  }
}

std::vector<GridSample> import_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.csv");
  if (!manifest) fail(ErrorCode::io_error, "no manifest.csv in " + dir.string());
  std::string line;
  if (!std::getline(manifest, line) || line != "id,index,label")
    fail(ErrorCode::format_error, "manifest header must be id,index,label");
  std::vector<GridSample> out;
  char name[32];
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::size_t id = 0, index = 0, label = 0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%zu", &id, &index, &label) != 3 || index >= kGridCells)
      fail(ErrorCode::format_error, "bad manifest row: " + line);
    std::snprintf(name, sizeof name, "%06zu.tsr", id);
    GridSample s;
    s.image = tensor_read(dir / name);
    s.index = index;
    s.label = label;
    out.push_back(std::move(s));
  }
  return out;
}

ToyModel ToyModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  Pcg32 rng(seed, streams::init);
  ToyModel m;
  m.config = cfg;
  const std::size_t C1 = cfg.conv1_channels, C2 = cfg.conv2_channels, P = cfg.fused_channels, k = cfg.fusion_kernel;
  m.conv1 = ag::Parameter("conv1", ag::init_uniform({C1, kInputChannels, 3, 3}, kInputChannels * 9, rng));
  m.conv2 = ag::Parameter("conv2", ag::init_uniform({C2, C1, 3, 3}, C1 * 9, rng));
  m.index_branch = ag::init_mlp3("index", kGridCells, cfg.index_hidden, P, rng);
  m.theta_x = ag::Parameter("theta_x", ag::init_uniform({P, C2, k, k}, C2 * k * k, rng));
  m.head = ag::FcParams::init("head", P, cfg.classes, rng);
  return m;
}

std::vector<ag::Parameter*> ToyModel::parameters() {
  std::vector<ag::Parameter*> out{&conv1, &conv2};
  for (auto& l : index_branch) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.insert(out.end(), {&theta_x, &head.weight, &head.bias});
  return out;
}

std::vector<const ag::Parameter*> ToyModel::parameters() const {
  auto ps = const_cast<ToyModel*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

Tensor backbone_input(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 1) fail(ErrorCode::shape_mismatch, "image must be [1,G,G]");
  const std::size_t H = image.dim(1), W = image.dim(2);
  Tensor x({kInputChannels, H, W});
  for (std::size_t r = 0; r < H; ++r)
    for (std::size_t c = 0; c < W; ++c) {
      const float v = image.at(0, r, c);
      x.at(0, r, c) = v;
      // coordinates weighted by intensity, so empty background stays zero
      x.at(1, r, c) = v * (H > 1 ? 2.0f * static_cast<float>(r) / static_cast<float>(H - 1) - 1.0f : 0.0f);
      x.at(2, r, c) = v * (W > 1 ? 2.0f * static_cast<float>(c) / static_cast<float>(W - 1) - 1.0f : 0.0f);
    }
  return x;
}

Tensor one_hot_index(std::size_t index) {
  if (index >= kGridCells) fail(ErrorCode::invalid_argument, "index must be in 0..3");
  Tensor t({kGridCells});
  t[index] = 1.0f;
  return t;
}

ToyGraph toy_graph(ag::Graph& g, ToyModel& model, const Tensor& image, std::size_t index) {
  check_image(model, image);
  const std::size_t P = model.config.fused_channels;
  ag::Var h = g.relu(g.conv2d(g.constant(backbone_input(image)), g.param(model.conv1)));
  h = g.relu(g.conv2d(h, g.param(model.conv2)));
  ag::Var prior;
  if (model.ablate_index) {
    prior = g.constant(zero_prior(P));
  } else {
    prior = g.reshape(ag::mlp3(g, g.constant(one_hot_index(index)), model.index_branch), {P, 1, 1});
  }
  const ag::Var fused = g.relu(g.add(g.conv2d(h, g.param(model.theta_x)), prior));
  const ag::Var logits = ag::fc(g, g.global_avg_pool(fused), model.head);
  return {logits, fused};
}

ToyOutput toy_forward(const ToyModel& model, const Tensor& image, std::size_t index) {
  check_image(model, image);
  const std::size_t P = model.config.fused_channels;
  Tensor h = relu(conv2d_valid(backbone_input(image), ConvKernel(model.conv1.value)));
  h = relu(conv2d_valid(h, ConvKernel(model.conv2.value)));
  const Tensor prior = model.ablate_index
                           ? zero_prior(P)
                           : mlp3_forward(one_hot_index(index), ag::to_layers(model.index_branch)).reshaped({P, 1, 1});
  Tensor fused = relu(broadcast_add(conv2d_valid(h, ConvKernel(model.theta_x.value)), prior));
  Tensor logits = fc_forward(global_avg_pool(fused), model.head.layer());
  return {std::move(logits), std::move(fused)};
}

std::size_t argmax(std::span<const float> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double toy_evaluate(const ToyModel& model, const std::vector<GridSample>& samples,
                    const std::vector<std::size_t>* indices) {
  if (samples.empty()) fail(ErrorCode::empty_dataset, "no samples to evaluate");
  if (indices && indices->size() != samples.size()) fail(ErrorCode::shape_mismatch, "index override length");
  std::vector<Tensor> logits;
  std::vector<std::size_t> labels;
  logits.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    logits.push_back(toy_forward(model, samples[i].image, indices ? (*indices)[i] : samples[i].index).logits);
    labels.push_back(samples[i].label);
  }
  return accuracy(logits, labels);
}

double accuracy(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels) {
  if (logits.empty()) fail(ErrorCode::empty_dataset, "no samples to evaluate");
  if (logits.size() != labels.size()) fail(ErrorCode::shape_mismatch, "logits and labels differ in length");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) correct += argmax(logits[i].data()) == labels[i];
  return static_cast<double>(correct) / static_cast<double>(logits.size());
}

double fusion_locality(const ToyModel& model, const std::vector<GridSample>& samples) {
  if (samples.empty()) fail(ErrorCode::empty_dataset, "no samples");
  std::size_t hits = 0;
  for (const auto& s : samples) {
    const Tensor l1 = l1_map(toy_forward(model, s.image, s.index).fused);
    const std::size_t H = l1.dim(0), W = l1.dim(1);
    std::array<double, kGridCells> quad{};
    for (std::size_t r = 0; r < H; ++r)
      for (std::size_t c = 0; c < W; ++c) {
        const std::size_t q = (r < H / 2 ? 0 : 2) + (c < W / 2 ? 0 : 1);
        quad[q] += l1[r * W + c];
      }
    const auto best = static_cast<std::size_t>(std::max_element(quad.begin(), quad.end()) - quad.begin());
    if (best == s.index) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

TrainResult toy_train(const TrainConfig& cfg) {
  DatasetConfig dc{cfg.seed, cfg.n_train, cfg.classes, cfg.glyph_size, cfg.noise_std, Split::train};
  const auto train = gen_dataset(dc);
  dc.n = cfg.n_test;
  dc.split = Split::test;

  ModelConfig mc = cfg.model;
  mc.classes = cfg.classes;
  mc.glyph_size = cfg.glyph_size;
  TrainResult result{{}, 0.0, ToyModel::init(mc, cfg.seed), gen_dataset(dc)};
  ToyModel& model = result.model;
  model.ablate_index = cfg.ablate_index;
  const auto params = model.parameters();

  Pcg32 order_rng(cfg.seed, streams::order);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    for (std::size_t i : order) {
      ag::Graph g;
      const ToyGraph fwd = toy_graph(g, model, train[i].image, train[i].index);
      const ag::Var loss = g.softmax_xent(fwd.logits, train[i].label);
      total += g.scalar(loss);
      g.backward(loss);
      ag::sgd_step(params, cfg.lr);
    }
    result.train_curve.push_back(train.empty() ? 0.0 : total / static_cast<double>(train.size()));
  }
  if (!result.test_set.empty()) result.test_accuracy = toy_evaluate(model, result.test_set);
  return result;
}

}  // namespace acm::toy
