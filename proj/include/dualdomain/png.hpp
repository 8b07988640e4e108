#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dualdomain/crc32.hpp"
#include "dualdomain/grid.hpp"

namespace dualdomain {

namespace detail {

inline void be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& data) {
  be32(out, static_cast<uint32_t>(data.size()));
  const size_t crc_begin = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uint32_t crc = crc32(out.data() + crc_begin, out.size() - crc_begin);
  be32(out, crc);
}

inline uint32_t adler32(const std::vector<uint8_t>& data) {
  uint32_t a = 1, b = 0;
  for (uint8_t byte : data) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  return (b << 16) | a;
}

/// zlib stream with stored (uncompressed) deflate blocks.
inline std::vector<uint8_t> zlib_stored(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> out;
  out.push_back(0x78);
  out.push_back(0x01);
  size_t off = 0;
  do {
    const size_t n = std::min<size_t>(65535, raw.size() - off);
    const bool final = off + n == raw.size();
    out.push_back(final ? 0x01 : 0x00);
    out.push_back(static_cast<uint8_t>(n & 0xFF));
    out.push_back(static_cast<uint8_t>(n >> 8));
    out.push_back(static_cast<uint8_t>(~n & 0xFF));
    out.push_back(static_cast<uint8_t>((~n >> 8) & 0xFF));
    out.insert(out.end(), raw.begin() + off, raw.begin() + off + n);
    off += n;
  } while (off < raw.size());
  const uint32_t ad = adler32(raw);
  out.push_back(static_cast<uint8_t>(ad >> 24));
  out.push_back(static_cast<uint8_t>(ad >> 16));
  out.push_back(static_cast<uint8_t>(ad >> 8));
  out.push_back(static_cast<uint8_t>(ad));
  return out;
}

} // namespace detail

/// 8-bit grayscale PNG.
inline void write_png_gray8(const std::filesystem::path& path,
                            const Grid<uint8_t>& img) {
  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  std::vector<uint8_t> ihdr;
  detail::be32(ihdr, static_cast<uint32_t>(img.width()));
  detail::be32(ihdr, static_cast<uint32_t>(img.height()));
  ihdr.push_back(8); // bit depth
  ihdr.push_back(0); // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::png_chunk(out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(img.height()) * (img.width() + 1));
  for (int y = 0; y < img.height(); ++y) {
    raw.push_back(0); // filter: none
    raw.insert(raw.end(), img.row(y), img.row(y) + img.width());
  }
  detail::png_chunk(out, "IDAT", detail::zlib_stored(raw));
  detail::png_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) raise(ErrorKind::io, "cannot write image: " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) raise(ErrorKind::io, "write failed: " + path.string());
}

/// Linear map of a real image into 8-bit gray over [lo, hi].
inline Grid<uint8_t> to_gray8(const RealGrid& img, double lo, double hi) {
  Grid<uint8_t> out(img.height(), img.width());
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  for (size_t i = 0; i < img.size(); ++i) {
    const double v = (img.data()[i] - lo) * scale;
    out.data()[i] = static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return out;
}

/// Simple line plot of one series on a white canvas with axes; the CSV next
/// to it carries the exact numbers.
inline void write_curve_png(const std::filesystem::path& path,
                            const std::vector<double>& values,
                            int width = 640, int height = 480) {
  Grid<uint8_t> canvas(height, width, 255);
  const int ml = 48, mr = 16, mt = 16, mb = 32; // margins
  const int x0 = ml, x1 = width - mr, y0 = height - mb, y1 = mt;
  for (int x = x0; x <= x1; ++x) canvas.at(y0, x) = 0;
  for (int y = y1; y <= y0; ++y) canvas.at(y, x0) = 0;
  if (values.size() >= 2) {
    double lo = values[0], hi = values[0];
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto px = [&](size_t i) {
      return x0 + static_cast<int>(std::lround(
                      (x1 - x0) * static_cast<double>(i) /
                      static_cast<double>(values.size() - 1)));
    };
    auto py = [&](double v) {
      return y0 - static_cast<int>(std::lround((y0 - y1) * (v - lo) / (hi - lo)));
    };
    for (size_t i = 0; i + 1 < values.size(); ++i) {
      // Bresenham segment
      int ax = px(i), ay = py(values[i]), bx = px(i + 1), by = py(values[i + 1]);
      const int dx = std::abs(bx - ax), dy = -std::abs(by - ay);
      const int sx = ax < bx ? 1 : -1, sy = ay < by ? 1 : -1;
      int err = dx + dy;
      for (;;) {
        if (ay >= 0 && ay < height && ax >= 0 && ax < width)
          canvas.at(ay, ax) = 0;
        if (ax == bx && ay == by) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
          err += dy;
          ax += sx;
        }
        if (e2 <= dx) {
          err += dx;
          ay += sy;
        }
      }
      // data point marker
      const int cx = px(i), cy = py(values[i]);
      for (int oy = -1; oy <= 1; ++oy)
        for (int ox = -1; ox <= 1; ++ox)
          if (cy + oy >= 0 && cy + oy < height && cx + ox >= 0 && cx + ox < width)
            canvas.at(cy + oy, cx + ox) = 0;
    }
  }
  write_png_gray8(path, canvas);
}

/// Side-by-side panel of magnitude images on a shared intensity scale.
inline void write_panel_png(const std::filesystem::path& path,
                            const std::vector<const RealGrid*>& images,
                            double lo, double hi, int upscale = 2,
                            int gap = 4) {
  if (images.empty()) raise(ErrorKind::invalid_input, "write_panel_png: empty");
  const int h = images[0]->height(), w = images[0]->width();
  const int ph = h * upscale;
  const int pw = static_cast<int>(images.size()) * w * upscale +
                 gap * (static_cast<int>(images.size()) - 1);
  Grid<uint8_t> canvas(ph, pw, 255);
  int xoff = 0;
  for (const RealGrid* img : images) {
    const Grid<uint8_t> g = to_gray8(*img, lo, hi);
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < w * upscale; ++x)
        canvas.at(y, xoff + x) = g.at(y / upscale, x / upscale);
    xoff += w * upscale + gap;
  }
  write_png_gray8(path, canvas);
}

} // namespace dualdomain
