#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include <fmt/format.h>

#include "srlp/error.hpp"

// Little-endian primitives shared by the embeddings and checkpoint formats.
namespace srlp::detail {

template <class UInt>
void write_le(std::ostream& out, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <class UInt>
UInt read_le(std::istream& in, std::string_view what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    fail(ErrorCode::Parse, fmt::format("unexpected end of file reading {}", what));
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return value;
}

inline void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
inline std::uint32_t read_u32(std::istream& in, std::string_view what) {
  return read_le<std::uint32_t>(in, what);
}

inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }
inline float read_f32(std::istream& in, std::string_view what) {
  return std::bit_cast<float>(read_le<std::uint32_t>(in, what));
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
inline double read_f64(std::istream& in, std::string_view what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

inline void write_string(std::ostream& out, std::string_view s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, std::string_view what, std::uint32_t max_len = 1u << 20) {
  const std::uint32_t len = read_u32(in, what);
  if (len > max_len) fail(ErrorCode::Parse, fmt::format("{} length {} exceeds limit", what, len));
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (in.gcount() != static_cast<std::streamsize>(len)) {
    fail(ErrorCode::Parse, fmt::format("unexpected end of file reading {}", what));
  }
  return s;
}

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline bool read_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  return in.gcount() == static_cast<std::streamsize>(magic.size()) && got == magic;
}

}  // namespace srlp::detail
