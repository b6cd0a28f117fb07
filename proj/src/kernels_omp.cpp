#include <algorithm>

#include "acm/kernels.hpp"

namespace acm::kernels::omp {

// Each thread owns whole output channels (or input channels for the input
// gradient); inner accumulation order matches serial:: exactly.

void conv2d(const ConvDims& d, std::span<const float> in, std::span<const float> k, std::span<float> out) {
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(d.P);
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pp = 0; pp < P; ++pp) {
    const std::size_t p = static_cast<std::size_t>(pp);
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
}

void conv2d_grad_input(const ConvDims& d, std::span<const float> grad_out, std::span<const float> k,
                       std::span<float> grad_in) {
  const std::ptrdiff_t C = static_cast<std::ptrdiff_t>(d.C);
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t cc = 0; cc < C; ++cc) {
    const std::size_t c = static_cast<std::size_t>(cc);
    for (std::size_t y = 0; y < d.H; ++y)
      for (std::size_t x = 0; x < d.W; ++x) {
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
}

void conv2d_grad_kernel(const ConvDims& d, std::span<const float> in, std::span<const float> grad_out,
                        std::span<float> grad_k) {
  const std::ptrdiff_t P = static_cast<std::ptrdiff_t>(d.P);
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pp = 0; pp < P; ++pp) {
    const std::size_t p = static_cast<std::size_t>(pp);
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
}

void depthwise(const ConvDims& d, std::span<const float> search, std::span<const float> tmpl,
               std::span<float> out) {
  const std::ptrdiff_t C = static_cast<std::ptrdiff_t>(d.C);
  const std::size_t Ho = d.out_h(), Wo = d.out_w();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t cc = 0; cc < C; ++cc) {
    const std::size_t c = static_cast<std::size_t>(cc);
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
}

}  // namespace acm::kernels::omp
