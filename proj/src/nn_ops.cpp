#include "acm/nn_ops.hpp"

#include <cmath>

#include "acm/kernels.hpp"

namespace acm {

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank)
    fail(ErrorCode::rank_error,
         std::string(what) + " expects rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
}

kernels::ConvDims conv_dims(const Shape& in, const Shape& k) {
  if (in[0] != k[1])
    fail(ErrorCode::shape_mismatch, "kernel " + shape_str(k) + " does not match input channels of " + shape_str(in));
  if (k[2] > in[1] || k[3] > in[2])
    fail(ErrorCode::kernel_too_large, "kernel " + shape_str(k) + " larger than input " + shape_str(in));
  return {in[0], in[1], in[2], k[0], k[2], k[3]};
}

kernels::ConvDims corr_dims(const Tensor& search, const Tensor& tmpl) {
  require_rank(search, 3, "search");
  require_rank(tmpl, 3, "template");
  if (search.dim(0) != tmpl.dim(0))
    fail(ErrorCode::shape_mismatch,
         "template " + shape_str(tmpl.shape()) + " vs search " + shape_str(search.shape()) + " channels");
  if (tmpl.dim(1) > search.dim(1) || tmpl.dim(2) > search.dim(2))
    fail(ErrorCode::kernel_too_large,
         "template " + shape_str(tmpl.shape()) + " larger than search " + shape_str(search.shape()));
  return {search.dim(0), search.dim(1), search.dim(2), search.dim(0), tmpl.dim(1), tmpl.dim(2)};
}

}  // namespace

ConvKernel::ConvKernel(Tensor weights) : weights_(std::move(weights)) {
  require_rank(weights_, 4, "ConvKernel");
}

void BatchNormParams::validate() const {
  const std::size_t C = gamma.numel();
  if (beta.numel() != C || running_mean.numel() != C || running_var.numel() != C)
    fail(ErrorCode::shape_mismatch, "batch-norm parameter vectors differ in length");
  if (!(eps > 0.0f)) fail(ErrorCode::invalid_argument, "batch-norm eps must be positive");
  for (float v : running_var.data())
    if (v < 0.0f) fail(ErrorCode::invalid_argument, "negative running variance");
}

Tensor conv2d_valid(const Tensor& input, const ConvKernel& kernel, const ComputeOptions& opts) {
  require_rank(input, 3, "conv2d_valid input");
  const auto d = conv_dims(input.shape(), kernel.weights().shape());
  Tensor out({d.P, d.out_h(), d.out_w()});
  if (opts.exec == Exec::parallel)
    kernels::omp::conv2d(d, input.data(), kernel.weights().data(), out.data());
  else
    kernels::serial::conv2d(d, input.data(), kernel.weights().data(), out.data());
  if (opts.stats) ++opts.stats->conv2d_calls;
  return out;
}

Tensor conv2d_valid_im2col(const Tensor& input, const ConvKernel& kernel) {
  require_rank(input, 3, "conv2d_valid input");
  const auto d = conv_dims(input.shape(), kernel.weights().shape());
  Tensor out({d.P, d.out_h(), d.out_w()});
  kernels::serial::conv2d_im2col(d, input.data(), kernel.weights().data(), out.data());
  return out;
}

Tensor depthwise_corr(const Tensor& search, const Tensor& tmpl, const ComputeOptions& opts) {
  const auto d = corr_dims(search, tmpl);
  Tensor out({d.C, d.out_h(), d.out_w()});
  if (opts.exec == Exec::parallel)
    kernels::omp::depthwise(d, search.data(), tmpl.data(), out.data());
  else
    kernels::serial::depthwise(d, search.data(), tmpl.data(), out.data());
  if (opts.stats) ++opts.stats->depthwise_calls;
  return out;
}

Tensor xcorr(const Tensor& search, const Tensor& tmpl, const ComputeOptions& opts) {
  const auto d = corr_dims(search, tmpl);
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  Tensor out({1, Ho, Wo});
  // one f64 accumulator per position over (c, u, v): the channel sum of the
  // depth-wise map before its per-channel rounding
  for (std::size_t i = 0; i < Ho; ++i)
    for (std::size_t j = 0; j < Wo; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d.C; ++c)
        for (std::size_t u = 0; u < d.kh; ++u)
          for (std::size_t v = 0; v < d.kw; ++v)
            acc += static_cast<double>(tmpl.at(c, u, v)) * search.at(c, i + u, j + v);
      out[i * Wo + j] = static_cast<float>(acc);
    }
  if (opts.stats) ++opts.stats->depthwise_calls;
  return out;
}

Tensor fc_forward(const Tensor& x, const FcLayer& layer) {
  require_rank(layer.weights, 2, "FcLayer weights");
  const std::size_t out_n = layer.out_features(), in_n = layer.in_features();
  if (layer.bias.numel() != out_n) fail(ErrorCode::shape_mismatch, "FcLayer bias length differs from rows");
  if (x.numel() != in_n)
    fail(ErrorCode::shape_mismatch,
         "FcLayer expects " + std::to_string(in_n) + " inputs, got " + std::to_string(x.numel()));
  Tensor y({out_n});
  for (std::size_t o = 0; o < out_n; ++o) {
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < in_n; ++i) acc += static_cast<double>(layer.weights[o * in_n + i]) * x[i];
    y[o] = static_cast<float>(acc);
  }
  return y;
}

Tensor mlp3_forward(const Tensor& x, const Mlp3& layers) {
  Tensor h = relu(fc_forward(x, layers[0]));
  h = relu(fc_forward(h, layers[1]));
  return fc_forward(h, layers[2]);
}

Tensor batchnorm_infer(const Tensor& t, const BatchNormParams& p) {
  p.validate();
  if (t.rank() < 1 || t.dim(0) != p.channels())
    fail(ErrorCode::shape_mismatch, "batch-norm over " + std::to_string(p.channels()) + " channels given " +
                                        shape_str(t.shape()));
  Tensor out(t.shape());
  const std::size_t plane = t.numel() / t.dim(0);
  for (std::size_t c = 0; c < p.channels(); ++c) {
    const double scale = p.gamma[c] / std::sqrt(static_cast<double>(p.running_var[c]) + p.eps);
    for (std::size_t k = 0; k < plane; ++k) {
      const std::size_t n = c * plane + k;
      out[n] = static_cast<float>(scale * (static_cast<double>(t[n]) - p.running_mean[c]) + p.beta[c]);
    }
  }
  return out;
}

Tensor head1x1(const Tensor& corr, const ConvKernel& kernel, const ComputeOptions& opts) {
  if (kernel.kh() != 1 || kernel.kw() != 1)
    fail(ErrorCode::shape_mismatch, "head1x1 needs a 1x1 kernel, got " + shape_str(kernel.weights().shape()));
  require_rank(corr, 3, "head1x1 input");
  if (corr.dim(0) != kernel.in_channels())
    fail(ErrorCode::shape_mismatch, "head1x1 channel mismatch");
  const std::size_t K = kernel.out_channels(), P = corr.dim(0), plane = corr.dim(1) * corr.dim(2);
  Tensor out({K, corr.dim(1), corr.dim(2)});
  const Tensor& w = kernel.weights();
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t n = 0; n < plane; ++n) {
      double acc = 0.0;
      for (std::size_t p = 0; p < P; ++p) acc += static_cast<double>(w[k * P + p]) * corr[p * plane + n];
      out[k * plane + n] = static_cast<float>(acc);
    }
  if (opts.stats) ++opts.stats->conv2d_calls;
  return out;
}

Tensor global_avg_pool(const Tensor& t) {
  require_rank(t, 3, "global_avg_pool");
  const std::size_t C = t.dim(0), plane = t.dim(1) * t.dim(2);
  Tensor out({C});
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < plane; ++k) acc += t[c * plane + k];
    out[c] = static_cast<float>(acc / static_cast<double>(plane));
  }
  return out;
}

Tensor conv2d_valid_grad_input(const Tensor& grad_out, const ConvKernel& kernel, const Shape& input_shape,
                               const ComputeOptions& opts) {
  const auto d = conv_dims(input_shape, kernel.weights().shape());
  Tensor g(input_shape);
  if (opts.exec == Exec::parallel)
    kernels::omp::conv2d_grad_input(d, grad_out.data(), kernel.weights().data(), g.data());
  else
    kernels::serial::conv2d_grad_input(d, grad_out.data(), kernel.weights().data(), g.data());
  return g;
}

Tensor conv2d_valid_grad_kernel(const Tensor& input, const Tensor& grad_out, const Shape& kernel_shape,
                                const ComputeOptions& opts) {
  const auto d = conv_dims(input.shape(), kernel_shape);
  Tensor g(kernel_shape);
  if (opts.exec == Exec::parallel)
    kernels::omp::conv2d_grad_kernel(d, input.data(), grad_out.data(), g.data());
  else
    kernels::serial::conv2d_grad_kernel(d, input.data(), grad_out.data(), g.data());
  return g;
}

Tensor depthwise_corr_grad_search(const Tensor& grad_out, const Tensor& tmpl, const Shape& search_shape) {
  const kernels::ConvDims d{search_shape[0], search_shape[1], search_shape[2], search_shape[0], tmpl.dim(1),
                            tmpl.dim(2)};
  Tensor g(search_shape);
  kernels::serial::depthwise_grad_search(d, grad_out.data(), tmpl.data(), g.data());
  return g;
}

Tensor depthwise_corr_grad_template(const Tensor& search, const Tensor& grad_out, const Shape& tmpl_shape) {
  const kernels::ConvDims d{search.dim(0), search.dim(1), search.dim(2), search.dim(0), tmpl_shape[1],
                            tmpl_shape[2]};
  Tensor g(tmpl_shape);
  kernels::serial::depthwise_grad_template(d, search.data(), grad_out.data(), g.data());
  return g;
}

}  // namespace acm
