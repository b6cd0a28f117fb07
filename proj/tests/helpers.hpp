#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "acm/error.hpp"
#include "acm/rng.hpp"
#include "acm/tensor.hpp"
#include "doctest.h"

// Assert that `expr` throws acm::Error carrying `code`.
#define CHECK_ERROR_CODE(expr, ecode)                   \
  do {                                                  \
    bool caught_ = false;                               \
    try {                                               \
      (void)(expr);                                     \
    } catch (const acm::Error& e_) {                    \
      caught_ = true;                                   \
      CHECK_MESSAGE(e_.code() == (ecode), e_.what());   \
    }                                                   \
    CHECK_MESSAGE(caught_, "expected acm::Error");      \
  } while (0)

namespace testing {

inline acm::Tensor rand_tensor(acm::Shape s, std::uint64_t seed, float lo = -1.0f, float hi = 1.0f) {
  acm::Pcg32 rng(seed, 99);
  return acm::random_uniform(std::move(s), rng, lo, hi);
}

// Fresh scratch directory under the build tree, removed up front.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("acm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- independent loop oracles ------------------------------------------

// out[p][i][j] = sum_{c,u,v} k[p][c][u][v] * in[c][i+u][j+v]
inline acm::Tensor conv_oracle(const acm::Tensor& in, const acm::Tensor& k) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const std::size_t P = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  acm::Tensor out({P, H - kh + 1, W - kw + 1});
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t i = 0; i + kh <= H; ++i)
      for (std::size_t j = 0; j + kw <= W; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t u = 0; u < kh; ++u)
            for (std::size_t v = 0; v < kw; ++v)
              s += double(k[((p * C + c) * kh + u) * kw + v]) * in.at(c, i + u, j + v);
        out.at(p, i, j) = float(s);
      }
  return out;
}

inline double max_diff(const acm::Tensor& a, const acm::Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(double(a[i]) - b[i]));
  return m;
}

}  // namespace testing
