#include "acm/tsr_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace acm {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4))
    fail(ErrorCode::format_error, std::string("truncated header reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// Guards against absurd allocations from corrupted headers.
constexpr std::uint32_t kMaxDims = 16;

}  // namespace

void tensor_write(const Tensor& t, std::ostream& out) {
  out.write(kTsrMagic, 4);
  put_u32(out, kTsrVersion);
  put_u32(out, kTsrDtypeF32);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) fail(ErrorCode::io_error, "write failed");
}

Tensor tensor_read(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4)) fail(ErrorCode::format_error, "truncated magic");
  if (std::memcmp(magic, kTsrMagic, 4) != 0) fail(ErrorCode::format_error, "bad magic");
  if (auto v = get_u32(in, "version"); v != kTsrVersion)
    fail(ErrorCode::format_error, "unsupported version " + std::to_string(v));
  if (auto d = get_u32(in, "dtype"); d != kTsrDtypeF32)
    fail(ErrorCode::format_error, "unsupported dtype code " + std::to_string(d));
  const std::uint32_t ndim = get_u32(in, "ndim");
  if (ndim > kMaxDims) fail(ErrorCode::format_error, "ndim " + std::to_string(ndim) + " too large");
  Shape shape(ndim);
  for (auto& d : shape) {
    d = get_u32(in, "dims");
    if (d == 0) fail(ErrorCode::format_error, "zero dimension");
  }
  std::vector<float> data(shape_numel(shape));
  for (auto& v : data) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
      fail(ErrorCode::format_error, "payload shorter than " + shape_str(shape) + " implies");
    const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                            (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    v = std::bit_cast<float>(u);
  }
  return Tensor(std::move(shape), std::move(data));
}

void tensor_write(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io_error, "cannot open " + path.string() + " for writing");
  tensor_write(t, out);
}

Tensor tensor_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_error, "cannot open " + path.string());
  return tensor_read(in);
}

}  // namespace acm
