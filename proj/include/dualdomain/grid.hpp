#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "dualdomain/errors.hpp"

namespace dualdomain {

/// Dense row-major 2D grid. The workhorse container for k-space slices,
/// magnitude images and masks.
template <typename T>
class Grid {
public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<size_t>(height) * static_cast<size_t>(width), fill) {
    if (height <= 0 || width <= 0)
      raise(ErrorKind::invalid_input, "grid dimensions must be positive");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  size_t size() const noexcept { return data_.size(); }

  T& at(int y, int x) { return data_[static_cast<size_t>(y) * width_ + x]; }
  const T& at(int y, int x) const {
    return data_[static_cast<size_t>(y) * width_ + x];
  }

  T* row(int y) { return data_.data() + static_cast<size_t>(y) * width_; }
  const T* row(int y) const {
    return data_.data() + static_cast<size_t>(y) * width_;
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid<double>;
using ComplexGrid = Grid<std::complex<double>>;
using MaskGrid = Grid<uint8_t>;

// A k-space slice and a magnitude image are plain grids; the aliases keep
// signatures close to the domain language.
using ComplexKSpace = ComplexGrid;
using MagnitudeImage = RealGrid;

inline bool is_finite(double v) { return std::isfinite(v); }
inline bool is_finite(const std::complex<double>& v) {
  return std::isfinite(v.real()) && std::isfinite(v.imag());
}

template <typename T>
bool all_finite(const Grid<T>& g) {
  for (const auto& v : g.data())
    if (!is_finite(v)) return false;
  return true;
}

template <typename T>
void require_finite(const Grid<T>& g, const char* who) {
  if (!all_finite(g))
    raise(ErrorKind::invalid_input, std::string(who) + ": non-finite input");
}

template <typename T>
void require_same_shape(const Grid<T>& a, const Grid<T>& b, const char* who) {
  if (!a.same_shape(b))
    raise(ErrorKind::invalid_input,
          std::string(who) + ": shape mismatch (" + std::to_string(a.height()) +
              "x" + std::to_string(a.width()) + " vs " +
              std::to_string(b.height()) + "x" + std::to_string(b.width()) + ")");
}

} // namespace dualdomain
