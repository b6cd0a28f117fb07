#pragma once

// Raw convolution kernels over contiguous row-major buffers.
//
// `serial` is the reference implementation: plain nested loops with f64
// accumulators. `omp` holds the OpenMP versions used when Exec::parallel is
// requested; they split the outermost output axis across threads and keep
// the reference accumulation order per element. `conv2d_im2col` is the
// lowered (column matrix + GEMM) form, kept for benchmarking against the
// direct loops.
//
// All convolutions are valid (no padding), stride 1, and use the
// cross-correlation orientation: out[i][j] = sum k[u][v] * in[i+u][j+v].

#include <cstddef>
#include <span>

namespace acm::kernels {

struct ConvDims {
  std::size_t C, H, W;   // input channels, height, width
  std::size_t P;         // output channels (ignored by depthwise)
  std::size_t kh, kw;    // kernel spatial size
  std::size_t out_h() const { return H - kh + 1; }
  std::size_t out_w() const { return W - kw + 1; }
};

namespace serial {

// in [C,H,W], k [P,C,kh,kw] -> out [P,H-kh+1,W-kw+1]
void conv2d(const ConvDims& d, std::span<const float> in, std::span<const float> k, std::span<float> out);
// grad_out [P,Ho,Wo] -> grad_in [C,H,W]
void conv2d_grad_input(const ConvDims& d, std::span<const float> grad_out, std::span<const float> k,
                       std::span<float> grad_in);
// grad_out [P,Ho,Wo] -> grad_k [P,C,kh,kw]
void conv2d_grad_kernel(const ConvDims& d, std::span<const float> in, std::span<const float> grad_out,
                        std::span<float> grad_k);

// search [C,H,W], tmpl [C,kh,kw] -> out [C,Ho,Wo]
void depthwise(const ConvDims& d, std::span<const float> search, std::span<const float> tmpl,
               std::span<float> out);
void depthwise_grad_search(const ConvDims& d, std::span<const float> grad_out, std::span<const float> tmpl,
                           std::span<float> grad_search);
void depthwise_grad_template(const ConvDims& d, std::span<const float> search, std::span<const float> grad_out,
                             std::span<float> grad_tmpl);

void conv2d_im2col(const ConvDims& d, std::span<const float> in, std::span<const float> k, std::span<float> out);

}  // namespace serial

namespace omp {

void conv2d(const ConvDims& d, std::span<const float> in, std::span<const float> k, std::span<float> out);
void conv2d_grad_input(const ConvDims& d, std::span<const float> grad_out, std::span<const float> k,
                       std::span<float> grad_in);
void conv2d_grad_kernel(const ConvDims& d, std::span<const float> in, std::span<const float> grad_out,
                        std::span<float> grad_k);
void depthwise(const ConvDims& d, std::span<const float> search, std::span<const float> tmpl,
               std::span<float> out);

}  // namespace omp

}  // namespace acm::kernels
