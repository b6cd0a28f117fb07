#include "acm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace acm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch: return "ShapeMismatch";
    case ErrorCode::rank_error: return "RankError";
    case ErrorCode::kernel_too_large: return "KernelTooLarge";
    case ErrorCode::zero_vector: return "ZeroVector";
    case ErrorCode::io_error: return "IoError";
    case ErrorCode::format_error: return "FormatError";
    case ErrorCode::missing_box: return "MissingBox";
    case ErrorCode::non_positive_box: return "NonPositiveBox";
    case ErrorCode::non_scalar_loss: return "NonScalarLoss";
    case ErrorCode::disconnected_loss: return "DisconnectedLoss";
    case ErrorCode::label_out_of_range: return "LabelOutOfRange";
    case ErrorCode::empty_exterior: return "EmptyExterior";
    case ErrorCode::non_positive_max: return "NonPositiveMax";
    case ErrorCode::too_many_classes: return "TooManyClasses";
    case ErrorCode::empty_dataset: return "EmptyDataset";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::check_failed: return "CheckFailed";
  }
  return "Unknown";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

static void check_dims(const Shape& shape) {
  for (auto d : shape)
    if (d == 0) fail(ErrorCode::invalid_argument, "zero-sized dimension in " + shape_str(shape));
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_numel(shape_))
    fail(ErrorCode::shape_mismatch, "data length " + std::to_string(data_.size()) + " does not match " +
                                        shape_str(shape_));
}

Tensor Tensor::from(Shape shape, std::initializer_list<float> values) {
  return Tensor(std::move(shape), std::vector<float>(values));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel())
    fail(ErrorCode::shape_mismatch, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), data_);
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    // align from the trailing dimension
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      fail(ErrorCode::shape_mismatch, "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

namespace {

// Element strides of `s` viewed at rank `rank`, with 0 on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& s, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t k = s.size(); k-- > 0;) {
    const std::size_t axis = k + (rank - s.size());
    strides[axis] = s[k] == 1 ? 0 : stride;
    stride *= s[k];
  }
  return strides;
}

}  // namespace

Tensor broadcast_add(const Tensor& a, const Tensor& b) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  Tensor out(out_shape);
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  const std::size_t rank = out_shape.size();

  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t n = 0; n < out.numel(); ++n) {
    out[n] = a[oa] + b[ob];
    // odometer increment, carrying from the last axis
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      oa += sa[k];
      ob += sb[k];
      if (idx[k] < out_shape[k]) break;
      oa -= sa[k] * idx[k];
      ob -= sb[k] * idx[k];
      idx[k] = 0;
    }
  }
  return out;
}

Tensor reduce_to_shape(const Tensor& t, const Shape& target) {
  if (broadcast_shape(t.shape(), target) != t.shape())
    fail(ErrorCode::shape_mismatch, "cannot reduce " + shape_str(t.shape()) + " to " + shape_str(target));
  const auto st = broadcast_strides(target, t.shape());
  const std::size_t rank = t.rank();
  std::vector<double> acc(shape_numel(target), 0.0);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t o = 0;
  for (std::size_t n = 0; n < t.numel(); ++n) {
    acc[o] += t[n];
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      o += st[k];
      if (idx[k] < t.shape()[k]) break;
      o -= st[k] * idx[k];
      idx[k] = 0;
    }
  }
  Tensor out(target);
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

Tensor relu(const Tensor& t) {
  Tensor out = t;
  for (auto& v : out.data()) v = v > 0.0f ? v : 0.0f;
  return out;
}

Tensor l1_map(const Tensor& t) {
  if (t.rank() != 3) fail(ErrorCode::rank_error, "l1_map expects rank 3, got " + shape_str(t.shape()));
  const std::size_t C = t.dim(0), H = t.dim(1), W = t.dim(2);
  Tensor out({H, W});
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t w = 0; w < W; ++w) {
      double s = 0.0;
      for (std::size_t c = 0; c < C; ++c) s += std::fabs(static_cast<double>(t.at(c, h, w)));
      out[h * W + w] = static_cast<float>(s);
    }
  return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    fail(ErrorCode::shape_mismatch,
         "cosine_similarity length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) fail(ErrorCode::zero_vector, "cosine_similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(ErrorCode::shape_mismatch, "max_abs_diff " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  float m = 0.0f;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace acm
