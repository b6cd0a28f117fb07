#pragma once

#include <array>
#include <span>
#include <vector>

#include "acm/exec.hpp"
#include "acm/tensor.hpp"

namespace acm {

// Convolution weights [out_channels, in_channels, kh, kw]. No bias.
class ConvKernel {
 public:
  ConvKernel() = default;
  explicit ConvKernel(Tensor weights);

  const Tensor& weights() const noexcept { return weights_; }
  std::size_t out_channels() const { return weights_.dim(0); }
  std::size_t in_channels() const { return weights_.dim(1); }
  std::size_t kh() const { return weights_.dim(2); }
  std::size_t kw() const { return weights_.dim(3); }

 private:
  Tensor weights_;
};

struct FcLayer {
  Tensor weights;  // [out, in]
  Tensor bias;     // [out]

  std::size_t in_features() const { return weights.dim(1); }
  std::size_t out_features() const { return weights.dim(0); }
};

using Mlp3 = std::array<FcLayer, 3>;

inline constexpr float kBatchNormEps = 1e-5f;

struct BatchNormParams {
  Tensor gamma, beta, running_mean, running_var;
  float eps = kBatchNormEps;

  std::size_t channels() const { return gamma.numel(); }
  void validate() const;
};

// All convolutions below are valid (unpadded), stride 1, and do NOT flip
// the kernel: out[p][i][j] = sum_{c,u,v} k[p][c][u][v] * in[c][i+u][j+v].

Tensor conv2d_valid(const Tensor& input, const ConvKernel& kernel, const ComputeOptions& opts = {});
Tensor conv2d_valid_im2col(const Tensor& input, const ConvKernel& kernel);

Tensor depthwise_corr(const Tensor& search, const Tensor& tmpl, const ComputeOptions& opts = {});
Tensor xcorr(const Tensor& search, const Tensor& tmpl, const ComputeOptions& opts = {});

// y = W x + b on a flat vector.
Tensor fc_forward(const Tensor& x, const FcLayer& layer);
// Three FC layers with ReLU after the first two.
Tensor mlp3_forward(const Tensor& x, const Mlp3& layers);

Tensor batchnorm_infer(const Tensor& t, const BatchNormParams& p);
Tensor head1x1(const Tensor& corr, const ConvKernel& kernel, const ComputeOptions& opts = {});

// [C,H,W] -> [C], f64 accumulation.
Tensor global_avg_pool(const Tensor& t);

// Backward helpers shared with the autograd engine.
Tensor conv2d_valid_grad_input(const Tensor& grad_out, const ConvKernel& kernel, const Shape& input_shape,
                               const ComputeOptions& opts = {});
Tensor conv2d_valid_grad_kernel(const Tensor& input, const Tensor& grad_out, const Shape& kernel_shape,
                                const ComputeOptions& opts = {});
Tensor depthwise_corr_grad_search(const Tensor& grad_out, const Tensor& tmpl, const Shape& search_shape);
Tensor depthwise_corr_grad_template(const Tensor& search, const Tensor& grad_out, const Shape& tmpl_shape);

}  // namespace acm
