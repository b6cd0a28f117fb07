#pragma once

#include <cstddef>

namespace acm {

// Sequential is the default everywhere and is what the tests pin against.
// The parallel kernels split work over output channels only, keeping each
// element's accumulation order, so both modes produce identical bits.
enum class Exec { sequential, parallel };

struct OpStats {
  std::size_t conv2d_calls = 0;
  std::size_t depthwise_calls = 0;
  std::size_t fc_calls = 0;
};

struct ComputeOptions {
  Exec exec = Exec::sequential;
  OpStats* stats = nullptr;  // optional instrumentation, caller-owned
};

}  // namespace acm
