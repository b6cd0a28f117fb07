#include <algorithm>
#include <vector>

#include "acm/kernels.hpp"

namespace acm::kernels::serial {

void conv2d(const ConvDims& d, std::span<const float> in, std::span<const float> k, std::span<float> out) {
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  for (std::size_t p = 0; p < d.P; ++p)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d.C; ++c)
          for (std::size_t u = 0; u < d.kh; ++u) {
            const float* krow = &k[((p * d.C + c) * d.kh + u) * d.kw];
            const float* irow = &in[(c * d.H + i + u) * d.W + j];
            for (std::size_t v = 0; v < d.kw; ++v) acc += static_cast<double>(krow[v]) * irow[v];
          }
        out[(p * Ho + i) * Wo + j] = static_cast<float>(acc);
      }
}

void conv2d_grad_input(const ConvDims& d, std::span<const float> grad_out, std::span<const float> k,
                       std::span<float> grad_in) {
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  for (std::size_t c = 0; c < d.C; ++c)
    for (std::size_t y = 0; y < d.H; ++y)
      for (std::size_t x = 0; x < d.W; ++x) {
        // out row i = y - u must lie in [0, Ho)
        const std::size_t u_lo = y >= Ho ? y - Ho + 1 : 0, u_hi = std::min(d.kh, y + 1);
        const std::size_t v_lo = x >= Wo ? x - Wo + 1 : 0, v_hi = std::min(d.kw, x + 1);
        double acc = 0.0;
        for (std::size_t p = 0; p < d.P; ++p)
          for (std::size_t u = u_lo; u < u_hi; ++u)
            for (std::size_t v = v_lo; v < v_hi; ++v)
              acc += static_cast<double>(grad_out[(p * Ho + (y - u)) * Wo + (x - v)]) *
                     k[((p * d.C + c) * d.kh + u) * d.kw + v];
        grad_in[(c * d.H + y) * d.W + x] = static_cast<float>(acc);
      }
}

void conv2d_grad_kernel(const ConvDims& d, std::span<const float> in, std::span<const float> grad_out,
                        std::span<float> grad_k) {
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  for (std::size_t p = 0; p < d.P; ++p)
    for (std::size_t c = 0; c < d.C; ++c)
      for (std::size_t u = 0; u < d.kh; ++u)
        for (std::size_t v = 0; v < d.kw; ++v) {
          double acc = 0.0;
          for (std::size_t i = 0; i < Ho; ++i) {
            const float* grow = &grad_out[(p * Ho + i) * Wo];
            const float* irow = &in[(c * d.H + i + u) * d.W + v];
            for (std::size_t j = 0; j < Wo; ++j) acc += static_cast<double>(grow[j]) * irow[j];
          }
          grad_k[((p * d.C + c) * d.kh + u) * d.kw + v] = static_cast<float>(acc);
        }
}

void depthwise(const ConvDims& d, std::span<const float> search, std::span<const float> tmpl,
               std::span<float> out) {
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  for (std::size_t c = 0; c < d.C; ++c)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        double acc = 0.0;
        for (std::size_t u = 0; u < d.kh; ++u) {
          const float* trow = &tmpl[(c * d.kh + u) * d.kw];
          const float* srow = &search[(c * d.H + i + u) * d.W + j];
          for (std::size_t v = 0; v < d.kw; ++v) acc += static_cast<double>(trow[v]) * srow[v];
        }
        out[(c * Ho + i) * Wo + j] = static_cast<float>(acc);
      }
}

void depthwise_grad_search(const ConvDims& d, std::span<const float> grad_out, std::span<const float> tmpl,
                           std::span<float> grad_search) {
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  for (std::size_t c = 0; c < d.C; ++c)
    for (std::size_t y = 0; y < d.H; ++y)
      for (std::size_t x = 0; x < d.W; ++x) {
        const std::size_t u_lo = y >= Ho ? y - Ho + 1 : 0, u_hi = std::min(d.kh, y + 1);
        const std::size_t v_lo = x >= Wo ? x - Wo + 1 : 0, v_hi = std::min(d.kw, x + 1);
        double acc = 0.0;
        for (std::size_t u = u_lo; u < u_hi; ++u)
          for (std::size_t v = v_lo; v < v_hi; ++v)
            acc += static_cast<double>(grad_out[(c * Ho + (y - u)) * Wo + (x - v)]) * tmpl[(c * d.kh + u) * d.kw + v];
        grad_search[(c * d.H + y) * d.W + x] = static_cast<float>(acc);
      }
}

void depthwise_grad_template(const ConvDims& d, std::span<const float> search, std::span<const float> grad_out,
                             std::span<float> grad_tmpl) {
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  for (std::size_t c = 0; c < d.C; ++c)
    for (std::size_t u = 0; u < d.kh; ++u)
      for (std::size_t v = 0; v < d.kw; ++v) {
        double acc = 0.0;
        for (std::size_t i = 0; i < Ho; ++i)
          for (std::size_t j = 0; j < Wo; ++j)
            acc += static_cast<double>(grad_out[(c * Ho + i) * Wo + j]) * search[(c * d.H + i + u) * d.W + j + v];
        grad_tmpl[(c * d.kh + u) * d.kw + v] = static_cast<float>(acc);
      }
}

void conv2d_im2col(const ConvDims& d, std::span<const float> in, std::span<const float> k, std::span<float> out) {
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
  const std::size_t rows = d.C * d.kh * d.kw, cols = Ho * Wo;
  // column matrix stored transposed ([cols, rows]) so each dot product is contiguous
  std::vector<float> colT(rows * cols);
  for (std::size_t i = 0; i < Ho; ++i)
    for (std::size_t j = 0; j < Wo; ++j) {
      float* dst = &colT[(i * Wo + j) * rows];
      for (std::size_t c = 0; c < d.C; ++c)
        for (std::size_t u = 0; u < d.kh; ++u) {
          const float* src = &in[(c * d.H + i + u) * d.W + j];
          std::copy(src, src + d.kw, dst);
          dst += d.kw;
        }
    }
  for (std::size_t p = 0; p < d.P; ++p) {
    const float* krow = &k[p * rows];
    for (std::size_t n = 0; n < cols; ++n) {
      const float* col = &colT[n * rows];
      double acc = 0.0;
      for (std::size_t r = 0; r < rows; ++r) acc += static_cast<double>(krow[r]) * col[r];
      out[p * cols + n] = static_cast<float>(acc);
    }
  }
}

}  // namespace acm::kernels::serial
