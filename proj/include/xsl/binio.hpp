#pragma once

// Little-endian primitives for the versioned binary file formats. Short
// reads surface as SnapshotCorruptError so damaged files never yield
// partial state.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "xsl/common.hpp"

namespace xsl::detail {

inline void put_u32(std::ostream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}

inline uint32_t get_u32(std::istream& in) {
  char b[4];
  if (!in.read(b, 4)) throw SnapshotCorruptError("file truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  }
  return v;
}

inline uint64_t get_u64(std::istream& in) {
  char b[8];
  if (!in.read(b, 8)) throw SnapshotCorruptError("file truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  }
  return v;
}

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, uint32_t max_len = 1u << 20) {
  const uint32_t len = get_u32(in);
  if (len > max_len) throw SnapshotCorruptError("string length implausible");
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) throw SnapshotCorruptError("file truncated");
  return s;
}

}  // namespace xsl::detail
