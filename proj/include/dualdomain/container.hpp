#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualdomain/crc32.hpp"
#include "dualdomain/errors.hpp"

namespace dualdomain {

// Single-file container used for volumes, masks and checkpoints:
//   magic "CKS1" | u32 LE header length | UTF-8 JSON header | payload | u32 LE CRC32
// The CRC covers everything between the magic and the footer.

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

struct Container {
  nlohmann::json header;
  std::vector<uint8_t> payload;
};

namespace detail {
constexpr char kMagic[4] = {'C', 'K', 'S', '1'};

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xFF));
}

inline uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}
} // namespace detail

inline std::vector<uint8_t> encode_container(const nlohmann::json& header,
                                             const std::vector<uint8_t>& payload) {
  const std::string hdr = header.dump();
  std::vector<uint8_t> out;
  out.reserve(hdr.size() + payload.size() + 12);
  out.insert(out.end(), detail::kMagic, detail::kMagic + 4);
  detail::put_u32(out, static_cast<uint32_t>(hdr.size()));
  out.insert(out.end(), hdr.begin(), hdr.end());
  out.insert(out.end(), payload.begin(), payload.end());
  const uint32_t crc = crc32(out.data() + 4, out.size() - 4);
  detail::put_u32(out, crc);
  return out;
}

inline void write_container(const std::filesystem::path& path,
                            const nlohmann::json& header,
                            const std::vector<uint8_t>& payload) {
  const auto bytes = encode_container(header, payload);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    raise(ErrorKind::io, "cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f)
    raise(ErrorKind::io, "write failed: " + path.string());
}

inline Container decode_container(const std::vector<uint8_t>& bytes,
                                  const std::string& origin) {
  if (bytes.size() < 12)
    raise(ErrorKind::format, origin + ": truncated (smaller than framing)");
  if (std::memcmp(bytes.data(), detail::kMagic, 4) != 0)
    raise(ErrorKind::format, origin + ": bad magic bytes");
  const uint32_t hlen = detail::get_u32(bytes.data() + 4);
  if (8ull + hlen + 4ull > bytes.size())
    raise(ErrorKind::format, origin + ": truncated header");
  const uint32_t stored_crc = detail::get_u32(bytes.data() + bytes.size() - 4);
  const uint32_t actual_crc = crc32(bytes.data() + 4, bytes.size() - 8);
  if (stored_crc != actual_crc)
    raise(ErrorKind::format, origin + ": CRC32 mismatch");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::format, origin + ": malformed JSON header: " + e.what());
  }
  c.payload.assign(bytes.begin() + 8 + hlen, bytes.end() - 4);
  return c;
}

inline Container read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    raise(ErrorKind::io, "cannot open: " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return decode_container(bytes, path.string());
}

// payload codecs ------------------------------------------------------------

inline void append_f32(std::vector<uint8_t>& out, float v) {
  uint8_t b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

inline float read_f32(const uint8_t* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}

inline void append_f64(std::vector<uint8_t>& out, double v) {
  uint8_t b[8];
  std::memcpy(b, &v, 8);
  out.insert(out.end(), b, b + 8);
}

inline double read_f64(const uint8_t* p) {
  double v;
  std::memcpy(&v, p, 8);
  return v;
}

} // namespace dualdomain
