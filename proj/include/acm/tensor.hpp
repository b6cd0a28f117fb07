#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "acm/error.hpp"

namespace acm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major f32 tensor. Every library operation returns a fresh
// tensor and never writes to its inputs; mutable access exists for
// parameter updates and for building inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
  static Tensor full(Shape shape, float value) { return Tensor(std::move(shape), value); }
  static Tensor from(Shape shape, std::initializer_list<float> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  const float* ptr() const noexcept { return data_.data(); }
  float* ptr() noexcept { return data_.data(); }

  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  // rank-3 accessors (channel, row, column)
  float at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }
  float& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * shape_[1] + h) * shape_[2] + w];
  }

  // Same data, new shape; element count must match.
  Tensor reshaped(Shape shape) const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<float> data_;
};

// Shape of broadcast_add(a, b) or ShapeMismatch.
Shape broadcast_shape(const Shape& a, const Shape& b);

Tensor broadcast_add(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& t);

// Per-pixel L1 norm across channels: [C,H,W] -> [H,W].
Tensor l1_map(const Tensor& t);

// A.B / (|A| |B|), accumulated in f64. ZeroVector if either norm is zero.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Sums a full-shape tensor down to `target`, the reverse of broadcasting.
Tensor reduce_to_shape(const Tensor& t, const Shape& target);

bool all_finite(const Tensor& t);
float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace acm
