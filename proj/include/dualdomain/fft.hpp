#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dualdomain/grid.hpp"

namespace dualdomain {

namespace detail {

using cd = std::complex<double>;

inline bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 Cooley-Tukey, unnormalized.
/// inverse=true conjugates the twiddles (still unnormalized).
inline void fft_pow2(cd* x, size_t n, bool inverse) {
  // bit reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const cd wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cd w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        const cd u = x[i + j];
        const cd v = x[i + j + len / 2] * w;
        x[i + j] = u + v;
        x[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

/// Bluestein chirp-z transform for arbitrary n, unnormalized, via a
/// power-of-two circular convolution.
inline void fft_bluestein(cd* x, size_t n, bool inverse) {
  const size_t m = std::bit_ceil(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cd> chirp(n);
  for (size_t k = 0; k < n; ++k) {
    // j*k mod 2n avoids the O(k^2) argument growing past 2*pi resolution
    const double jk = static_cast<double>((static_cast<unsigned long long>(k) * k) % (2 * n));
    const double ang = sign * std::numbers::pi * jk / static_cast<double>(n);
    chirp[k] = cd(std::cos(ang), std::sin(ang));
  }
  std::vector<cd> a(m, cd(0, 0)), b(m, cd(0, 0));
  for (size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (size_t k = 1; k < n; ++k) b[k] = b[m - k] = std::conj(chirp[k]);
  fft_pow2(a.data(), m, false);
  fft_pow2(b.data(), m, false);
  for (size_t k = 0; k < m; ++k) a[k] *= b[k];
  fft_pow2(a.data(), m, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (size_t k = 0; k < n; ++k) x[k] = a[k] * scale * chirp[k];
}

inline void fft_1d(cd* x, size_t n, bool inverse) {
  if (n == 1) return;
  if (is_pow2(n))
    fft_pow2(x, n, inverse);
  else
    fft_bluestein(x, n, inverse);
}

/// Circular shift of a grid by (dy, dx).
inline ComplexGrid roll(const ComplexGrid& g, int dy, int dx) {
  const int h = g.height(), w = g.width();
  ComplexGrid out(h, w);
  for (int y = 0; y < h; ++y) {
    const int ty = (y + dy) % h;
    for (int x = 0; x < w; ++x) out.at(ty, (x + dx) % w) = g.at(y, x);
  }
  return out;
}

inline ComplexGrid fftshift(const ComplexGrid& g) {
  return roll(g, g.height() / 2, g.width() / 2);
}

inline ComplexGrid ifftshift(const ComplexGrid& g) {
  return roll(g, (g.height() + 1) / 2, (g.width() + 1) / 2);
}

/// Unnormalized 2D transform, rows then columns.
inline void fft_2d(ComplexGrid& g, bool inverse) {
  const int h = g.height(), w = g.width();
  for (int y = 0; y < h; ++y) fft_1d(g.row(y), static_cast<size_t>(w), inverse);
  std::vector<cd> col(static_cast<size_t>(h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) col[y] = g.at(y, x);
    fft_1d(col.data(), static_cast<size_t>(h), inverse);
    for (int y = 0; y < h; ++y) g.at(y, x) = col[y];
  }
}

} // namespace detail

/// Centered, orthonormal 2D DFT: zero frequency lands at (h/2, w/2) and
/// Parseval holds exactly (sum|x|^2 == sum|X|^2).
inline ComplexKSpace fft2c(const ComplexGrid& image) {
  require_finite(image, "fft2c");
  ComplexGrid g = detail::ifftshift(image);
  detail::fft_2d(g, false);
  g = detail::fftshift(g);
  const double scale =
      1.0 / std::sqrt(static_cast<double>(g.height()) * g.width());
  for (auto& v : g.data()) v *= scale;
  return g;
}

/// Inverse of fft2c under the same centering and scaling.
inline ComplexGrid ifft2c(const ComplexKSpace& kspace) {
  require_finite(kspace, "ifft2c");
  ComplexGrid g = detail::ifftshift(kspace);
  detail::fft_2d(g, true);
  g = detail::fftshift(g);
  const double scale =
      1.0 / std::sqrt(static_cast<double>(g.height()) * g.width());
  for (auto& v : g.data()) v *= scale;
  return g;
}

/// Elementwise complex modulus.
inline MagnitudeImage magnitude(const ComplexGrid& x) {
  require_finite(x, "magnitude");
  MagnitudeImage out(x.height(), x.width());
  for (size_t i = 0; i < x.size(); ++i) out.data()[i] = std::abs(x.data()[i]);
  return out;
}

} // namespace dualdomain
