// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary array files:
//   "DBAR" | u32 version | u32 rank | u32 dims[rank] | u32 dtype | payload | u32 crc32
// All integers little-endian, payload row-major, CRC-32 (zlib polynomial)
// over every preceding byte. dtype 1/2 are float32 real/complex and carry
// images; 3/4 are float64 real/complex and carry boundary maps and
// scattering data, where single precision would destroy the small
// differences Lambda_sigma - Lambda_1.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "eit/common.hpp"

namespace eit::io {

inline constexpr std::uint32_t format_version = 1;
inline constexpr char magic[4] = {'D', 'B', 'A', 'R'};

enum class DType : std::uint32_t { f32 = 1, c64 = 2, f64 = 3, c128 = 4 };

inline std::size_t scalar_count(DType t) { return t == DType::c64 || t == DType::c128 ? 2 : 1; }
inline std::size_t scalar_bytes(DType t) { return t == DType::f32 || t == DType::c64 ? 4 : 8; }

struct FormatError : Error {
  using Error::Error;
};
struct ChecksumError : FormatError {
  using FormatError::FormatError;
};
struct VersionError : FormatError {
  using FormatError::FormatError;
};
struct TruncatedError : FormatError {
  using FormatError::FormatError;
};

// Values are held in double; complex arrays interleave (re, im).
struct Array {
  std::vector<std::uint32_t> dims;
  DType dtype = DType::f32;
  std::vector<double> data;

  std::size_t elements() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  friend bool operator==(const Array&, const Array&) = default;
};

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 | std::uint32_t{p[3]} << 24;
}

inline void put_scalar(std::vector<unsigned char>& out, double v, DType t) {
  if (scalar_bytes(t) == 4) {
    const auto f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  } else {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u32(out, static_cast<std::uint32_t>(bits));
    put_u32(out, static_cast<std::uint32_t>(bits >> 32));
  }
}

inline double get_scalar(const unsigned char* p, DType t) {
  if (scalar_bytes(t) == 4) {
    const std::uint32_t bits = get_u32(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  const std::uint64_t bits = std::uint64_t{get_u32(p)} | std::uint64_t{get_u32(p + 4)} << 32;
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline std::uint32_t crc32_of(const unsigned char* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<unsigned char> encode(const Array& a) {
  if (a.data.size() != a.elements() * scalar_count(a.dtype))
    throw InvalidArgument("encode: data size does not match dims");
  std::vector<unsigned char> out(magic, magic + 4);
  detail::put_u32(out, format_version);
  detail::put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) detail::put_u32(out, d);
  detail::put_u32(out, static_cast<std::uint32_t>(a.dtype));
  out.reserve(out.size() + a.data.size() * scalar_bytes(a.dtype) + 4);
  for (double v : a.data) detail::put_scalar(out, v, a.dtype);
  detail::put_u32(out, detail::crc32_of(out.data(), out.size()));
  return out;
}

inline Array decode(const std::vector<unsigned char>& bytes, const std::string& name = "<memory>") {
  auto need = [&](std::size_t n) {
    if (bytes.size() < n) throw TruncatedError(name + ": truncated file");
  };
  need(12);
  if (std::memcmp(bytes.data(), magic, 4) != 0) throw FormatError(name + ": not a DBAR array file");
  const std::uint32_t version = detail::get_u32(&bytes[4]);
  if (version != format_version)
    throw VersionError(name + ": format version " + std::to_string(version) + ", expected " +
                       std::to_string(format_version));
  const std::uint32_t rank = detail::get_u32(&bytes[8]);
  if (rank == 0 || rank > 8) throw FormatError(name + ": bad rank " + std::to_string(rank));
  need(12 + 4 * std::size_t{rank} + 4);
  Array a;
  for (std::uint32_t i = 0; i < rank; ++i) a.dims.push_back(detail::get_u32(&bytes[12 + 4 * i]));
  const std::uint32_t code = detail::get_u32(&bytes[12 + 4 * rank]);
  if (code < 1 || code > 4) throw FormatError(name + ": unknown dtype " + std::to_string(code));
  a.dtype = static_cast<DType>(code);
  const std::size_t header = 16 + 4 * std::size_t{rank};
  const std::size_t scalars = a.elements() * scalar_count(a.dtype);
  const std::size_t total = header + scalars * scalar_bytes(a.dtype) + 4;
  need(total);
  if (bytes.size() > total) throw FormatError(name + ": trailing bytes after checksum");
  if (detail::crc32_of(bytes.data(), total - 4) != detail::get_u32(&bytes[total - 4]))
    throw ChecksumError(name + ": checksum mismatch");
  a.data.resize(scalars);
  for (std::size_t i = 0; i < scalars; ++i) a.data[i] = detail::get_scalar(&bytes[header + i * scalar_bytes(a.dtype)], a.dtype);
  return a;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes through a temporary name so readers never see a partial file.
inline void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline void write_array(const std::filesystem::path& path, const Array& a) { write_bytes(path, encode(a)); }
inline Array read_array(const std::filesystem::path& path) { return decode(read_bytes(path), path.string()); }

// Trailing checksum of an encoded file, as recorded in manifests.
inline std::uint32_t stored_checksum(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 4) throw TruncatedError("truncated file");
  return detail::get_u32(&bytes[bytes.size() - 4]);
}

// ---------------------------------------------------------------------------
// Conversions for the library's grid types.

inline Array from_grid(const Grid<double>& g, DType t = DType::f32) {
  if (scalar_count(t) != 1) throw InvalidArgument("from_grid: real grid needs a real dtype");
  return {{static_cast<std::uint32_t>(g.height()), static_cast<std::uint32_t>(g.width())}, t, g.values()};
}

inline Array from_grid(const Grid<cplx>& g, DType t = DType::c128) {
  if (scalar_count(t) != 2) throw InvalidArgument("from_grid: complex grid needs a complex dtype");
  Array a{{static_cast<std::uint32_t>(g.height()), static_cast<std::uint32_t>(g.width())}, t, {}};
  a.data.reserve(2 * g.size());
  for (cplx v : g) {
    a.data.push_back(v.real());
    a.data.push_back(v.imag());
  }
  return a;
}

inline Grid<double> to_real_grid(const Array& a) {
  if (a.dims.size() != 2 || scalar_count(a.dtype) != 1) throw FormatError("expected a rank-2 real array");
  Grid<double> g(a.dims[1], a.dims[0]);
  g.values() = a.data;
  return g;
}

inline Grid<cplx> to_complex_grid(const Array& a) {
  if (a.dims.size() != 2 || scalar_count(a.dtype) != 2) throw FormatError("expected a rank-2 complex array");
  Grid<cplx> g(a.dims[1], a.dims[0]);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = {a.data[2 * i], a.data[2 * i + 1]};
  return g;
}

}  // namespace eit::io
