#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dualdomain/fft.hpp"
#include "dualdomain/grid.hpp"
#include "dualdomain/rng.hpp"

namespace dualdomain {

/// Scalar normalization statistics for one domain (Eq.-style (x-mean)/std).
struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  void validate() const {
    if (!(std > 0.0) || !std::isfinite(mean) || !std::isfinite(std))
      raise(ErrorKind::statistics, "NormStats: std must be positive and finite");
  }
};

/// Binary undersampling pattern plus the parameters that produced it.
struct SamplingMask {
  MaskGrid pattern;
  double target_acceleration = 0.0;
  double center_fraction = 0.0;
  uint64_t seed = 0;

  int height() const { return pattern.height(); }
  int width() const { return pattern.width(); }

  size_t sampled_count() const {
    size_t n = 0;
    for (uint8_t v : pattern.data()) n += v;
    return n;
  }

  double sampled_fraction() const {
    return static_cast<double>(sampled_count()) /
           static_cast<double>(pattern.size());
  }
};

namespace detail {
struct CenterBlock {
  int y0, y1, x0, x1; // half-open
  bool contains(int y, int x) const {
    return y >= y0 && y < y1 && x >= x0 && x < x1;
  }
  int64_t cells() const {
    return static_cast<int64_t>(y1 - y0) * (x1 - x0);
  }
};

inline CenterBlock center_block(int h, int w, double center_fraction) {
  const int ch = static_cast<int>(std::lround(center_fraction * h));
  const int cw = static_cast<int>(std::lround(center_fraction * w));
  const int y0 = (h - ch) / 2;
  const int x0 = (w - cw) / 2;
  return {y0, y0 + ch, x0, x0 + cw};
}
} // namespace detail

/// Variable-density Cartesian mask: locations drawn without replacement with
/// probability proportional to an isotropic Gaussian centered on k-space
/// center (sigma = 0.15 * min(h, w)), on top of a fully sampled central
/// block. Exactly round(h*w/acceleration) locations are sampled.
inline SamplingMask make_gaussian_mask(int height, int width,
                                       double acceleration,
                                       double center_fraction, uint64_t seed) {
  if (height <= 0 || width <= 0)
    raise(ErrorKind::config, "make_gaussian_mask: dimensions must be positive");
  if (!(acceleration > 1.0))
    raise(ErrorKind::config, "make_gaussian_mask: acceleration must be > 1");
  if (!(center_fraction > 0.0) || !(center_fraction < 1.0))
    raise(ErrorKind::config,
          "make_gaussian_mask: center_fraction must be in (0, 1)");

  const int64_t total = static_cast<int64_t>(height) * width;
  const int64_t budget = static_cast<int64_t>(
      std::llround(static_cast<double>(total) / acceleration));
  const auto block = detail::center_block(height, width, center_fraction);
  if (block.cells() > budget)
    raise(ErrorKind::config,
          "make_gaussian_mask: fully sampled center block (" +
              std::to_string(block.cells()) +
              " cells) exceeds the sample budget (" + std::to_string(budget) +
              ")");

  SamplingMask mask;
  mask.pattern = MaskGrid(height, width, 0);
  mask.target_acceleration = acceleration;
  mask.center_fraction = center_fraction;
  mask.seed = seed;

  for (int y = block.y0; y < block.y1; ++y)
    for (int x = block.x0; x < block.x1; ++x) mask.pattern.at(y, x) = 1;

  const int64_t remaining = budget - block.cells();
  if (remaining == 0) return mask;

  // Weighted sampling without replacement (Efraimidis-Spirakis): draw an
  // exponential key per candidate with rate = Gaussian weight; the smallest
  // `remaining` keys are the sample.
  const double sigma = 0.15 * std::min(height, width);
  const double cy = height / 2, cx = width / 2;
  struct Keyed {
    double key;
    int32_t y, x;
  };
  std::vector<Keyed> keys;
  keys.reserve(static_cast<size_t>(total - block.cells()));
  Rng rng(seed);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = rng.uniform_pos(); // one draw per cell, fixed order
      if (block.contains(y, x)) continue;
      const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
      const double w = std::exp(-d2 / (2.0 * sigma * sigma));
      keys.push_back({-std::log(u) / w, static_cast<int32_t>(y),
                      static_cast<int32_t>(x)});
    }
  }
  auto less = [](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  };
  std::nth_element(keys.begin(), keys.begin() + (remaining - 1), keys.end(),
                   less);
  for (int64_t i = 0; i < remaining; ++i)
    mask.pattern.at(keys[static_cast<size_t>(i)].y,
                    keys[static_cast<size_t>(i)].x) = 1;
  return mask;
}

/// Elementwise mask application; unsampled locations become exactly zero.
inline ComplexKSpace apply_mask(const ComplexKSpace& kspace,
                                const SamplingMask& mask) {
  require_finite(kspace, "apply_mask");
  if (kspace.height() != mask.height() || kspace.width() != mask.width())
    raise(ErrorKind::invalid_input, "apply_mask: shape mismatch");
  ComplexKSpace out(kspace.height(), kspace.width());
  for (size_t i = 0; i < kspace.size(); ++i)
    out.data()[i] = mask.pattern.data()[i] ? kspace.data()[i]
                                           : std::complex<double>(0.0, 0.0);
  return out;
}

namespace detail {
/// Kahan-compensated sum; keeps the statistics insensitive to input order.
class KahanSum {
public:
  void add(double v) {
    const double y = v - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

private:
  double sum_ = 0.0, comp_ = 0.0;
};

class StatsAccumulator {
public:
  void add(double v) {
    sum_.add(v);
    ++n_;
  }
  void add(const std::complex<double>& v) {
    add(v.real());
    add(v.imag());
  }
  template <typename T>
  void add_grid(const Grid<T>& g) {
    for (const auto& v : g.data()) add(v);
  }

  // second pass
  void add_sq(double v, double mean) { sq_.add((v - mean) * (v - mean)); }
  void add_sq(const std::complex<double>& v, double mean) {
    add_sq(v.real(), mean);
    add_sq(v.imag(), mean);
  }
  template <typename T>
  void add_grid_sq(const Grid<T>& g, double mean) {
    for (const auto& v : g.data()) add_sq(v, mean);
  }

  size_t count() const { return n_; }
  double mean() const { return sum_.value() / static_cast<double>(n_); }
  double pop_std() const {
    return std::sqrt(sq_.value() / static_cast<double>(n_));
  }

private:
  KahanSum sum_, sq_;
  size_t n_ = 0;
};

template <typename T>
NormStats norm_stats_impl(const std::vector<Grid<T>>& samples) {
  if (samples.empty())
    raise(ErrorKind::statistics, "compute_norm_stats: empty collection");
  StatsAccumulator acc;
  for (const auto& g : samples) {
    require_finite(g, "compute_norm_stats");
    acc.add_grid(g);
  }
  const double mean = acc.mean();
  for (const auto& g : samples) acc.add_grid_sq(g, mean);
  const double std = acc.pop_std();
  if (!(std > 0.0))
    raise(ErrorKind::statistics,
          "compute_norm_stats: zero variance (constant input)");
  return NormStats{mean, std};
}
} // namespace detail

/// Scalar mean / population standard deviation over every element of every
/// grid. Complex grids contribute real and imaginary parts jointly.
inline NormStats compute_norm_stats(const std::vector<RealGrid>& samples) {
  return detail::norm_stats_impl(samples);
}

inline NormStats compute_norm_stats(const std::vector<ComplexGrid>& samples) {
  return detail::norm_stats_impl(samples);
}

inline RealGrid normalize(const RealGrid& x, const NormStats& stats) {
  stats.validate();
  require_finite(x, "normalize");
  RealGrid out(x.height(), x.width());
  for (size_t i = 0; i < x.size(); ++i)
    out.data()[i] = (x.data()[i] - stats.mean) / stats.std;
  return out;
}

/// Complex grids get the same scalar affine map on both components.
inline ComplexGrid normalize(const ComplexGrid& x, const NormStats& stats) {
  stats.validate();
  require_finite(x, "normalize");
  ComplexGrid out(x.height(), x.width());
  const std::complex<double> mean(stats.mean, stats.mean);
  for (size_t i = 0; i < x.size(); ++i)
    out.data()[i] = (x.data()[i] - mean) / stats.std;
  return out;
}

inline RealGrid denormalize(const RealGrid& x, const NormStats& stats) {
  stats.validate();
  require_finite(x, "denormalize");
  RealGrid out(x.height(), x.width());
  for (size_t i = 0; i < x.size(); ++i)
    out.data()[i] = x.data()[i] * stats.std + stats.mean;
  return out;
}

inline ComplexGrid denormalize(const ComplexGrid& x, const NormStats& stats) {
  stats.validate();
  require_finite(x, "denormalize");
  ComplexGrid out(x.height(), x.width());
  const std::complex<double> mean(stats.mean, stats.mean);
  for (size_t i = 0; i < x.size(); ++i)
    out.data()[i] = x.data()[i] * stats.std + mean;
  return out;
}

/// Magnitude of the inverse transform of (typically undersampled) k-space.
inline MagnitudeImage zero_filled_recon(const ComplexKSpace& undersampled) {
  return magnitude(ifft2c(undersampled));
}

} // namespace dualdomain
