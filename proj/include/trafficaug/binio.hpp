#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

#include "trafficaug/types.hpp"

namespace trafficaug {

/// Byte order of multi-byte integers in a binary stream.
enum class ByteOrder { Little, Big };

inline std::uint16_t load_u16(const std::uint8_t* p, ByteOrder order) {
  if (order == ByteOrder::Little)
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
  return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}

inline std::uint32_t load_u32(const std::uint8_t* p, ByteOrder order) {
  if (order == ByteOrder::Little)
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

inline void store_u16(std::uint16_t v, Bytes& out, ByteOrder order) {
  if (order == ByteOrder::Little) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  } else {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
  }
}

inline void store_u32(std::uint32_t v, Bytes& out, ByteOrder order) {
  if (order == ByteOrder::Little) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  } else {
    for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

// Checkpoint streams are always little-endian regardless of host order.

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  Bytes b;
  store_u32(v, b, ByteOrder::Little);
  os.write(reinterpret_cast<const char*>(b.data()), 4);
}

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b, 8);
}

inline void write_f64_le(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  write_u64_le(os, v);
}

inline std::uint32_t read_u32_le(std::istream& is) {
  std::uint8_t b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw ParseError("checkpoint stream truncated");
  return load_u32(b, ByteOrder::Little);
}

inline std::uint64_t read_u64_le(std::istream& is) {
  std::uint8_t b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw ParseError("checkpoint stream truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | b[i];
  return v;
}

inline double read_f64_le(std::istream& is) {
  const std::uint64_t v = read_u64_le(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace trafficaug
