// Copyright 2026 The Cleanstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CLEANSTREAM_BINARY_IO_HPP_
#define CLEANSTREAM_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "cleanstream/error.hpp"

// Little-endian primitive encoding shared by the binary containers.
namespace cleanstream::binary {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

inline void put_u16(std::ostream& out, std::uint16_t v) {
  char bytes[2] = {static_cast<char>(v & 0xFF), static_cast<char>(v >> 8)};
  out.write(bytes, 2);
}

inline void put_i32(std::ostream& out, std::int32_t v) {
  put_u32(out, static_cast<std::uint32_t>(v));
}

inline void put_f32(std::ostream& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

inline void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void get_bytes(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw Error(Errc::kTruncated, "truncated container");
  }
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

inline std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  get_bytes(in, reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

inline std::int32_t get_i32(std::istream& in) {
  return static_cast<std::int32_t>(get_u32(in));
}

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0) {
    throw Error(Errc::kBadMagic, std::string("bad magic, expected ") + magic);
  }
}

// FNV-1a, used for configuration fingerprints.
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace cleanstream::binary

#endif  // CLEANSTREAM_BINARY_IO_HPP_
