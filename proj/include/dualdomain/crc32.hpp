#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

namespace dualdomain {

namespace detail {
inline const std::array<uint32_t, 256>& crc32_table() {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k)
        c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  return table;
}
} // namespace detail

/// Streaming CRC-32 (zlib/PNG polynomial). Start from 0, feed bytes, read value().
class Crc32 {
public:
  void update(const void* data, size_t n) {
    const auto* p = static_cast<const uint8_t*>(data);
    const auto& t = detail::crc32_table();
    for (size_t i = 0; i < n; ++i)
      state_ = t[(state_ ^ p[i]) & 0xFF] ^ (state_ >> 8);
  }

  uint32_t value() const { return state_ ^ 0xFFFFFFFFu; }

private:
  uint32_t state_ = 0xFFFFFFFFu;
};

inline uint32_t crc32(const void* data, size_t n) {
  Crc32 c;
  c.update(data, n);
  return c.value();
}

} // namespace dualdomain
