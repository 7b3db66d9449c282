#pragma once

// Little-endian float32 / uint32 helpers shared by the FRV1 and checkpoint codecs.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

namespace frnet::detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xffu), static_cast<char>((v >> 8) & 0xffu),
                         static_cast<char>((v >> 16) & 0xffu), static_cast<char>((v >> 24) & 0xffu)};
  out.write(bytes, 4);
}

inline std::uint32_t decode_u32(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& out, std::span<const float> values) {
  std::vector<char> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto v = std::bit_cast<std::uint32_t>(values[i]);
    buf[4 * i + 0] = static_cast<char>(v & 0xffu);
    buf[4 * i + 1] = static_cast<char>((v >> 8) & 0xffu);
    buf[4 * i + 2] = static_cast<char>((v >> 16) & 0xffu);
    buf[4 * i + 3] = static_cast<char>((v >> 24) & 0xffu);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline void decode_f32(std::span<const unsigned char> bytes, std::span<float> values) {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<float>(decode_u32(bytes.data() + 4 * i));
}

}  // namespace frnet::detail
