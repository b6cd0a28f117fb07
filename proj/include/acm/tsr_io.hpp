#pragma once

#include <filesystem>
#include <iosfwd>

#include "acm/tensor.hpp"

namespace acm {

// TSR layout, little-endian: "TSRF", u32 version (1), u32 dtype (1 = f32),
// u32 ndim, u32 dims[ndim], then raw f32 payload in row-major order.
inline constexpr char kTsrMagic[4] = {'T', 'S', 'R', 'F'};
inline constexpr std::uint32_t kTsrVersion = 1;
inline constexpr std::uint32_t kTsrDtypeF32 = 1;

void tensor_write(const Tensor& t, std::ostream& out);
Tensor tensor_read(std::istream& in);

void tensor_write(const Tensor& t, const std::filesystem::path& path);
Tensor tensor_read(const std::filesystem::path& path);

}  // namespace acm
