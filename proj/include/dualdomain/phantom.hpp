#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "dualdomain/fft.hpp"
#include "dualdomain/grid.hpp"
#include "dualdomain/rng.hpp"

namespace dualdomain {

/// Parameters for one synthetic subject: overlapping ellipses with a smooth
/// complex phase field, plus k-space noise.
struct PhantomSpec {
  int num_ellipses = 6;
  double intensity_lo = 0.4;
  double intensity_hi = 1.0;
  double phase_smoothness = 24.0; // correlation length of the phase field, px
  double noise_std = 0.01;        // complex Gaussian std per k-space component
  uint64_t seed = 0;

  void validate() const {
    if (num_ellipses < 1)
      raise(ErrorKind::config, "PhantomSpec: num_ellipses must be >= 1");
    if (!(intensity_lo < intensity_hi))
      raise(ErrorKind::config, "PhantomSpec: intensity range must be ordered");
    if (!(phase_smoothness > 0.0))
      raise(ErrorKind::config, "PhantomSpec: phase_smoothness must be > 0");
    if (noise_std < 0.0)
      raise(ErrorKind::config, "PhantomSpec: noise_std must be >= 0");
    if (!std::isfinite(intensity_lo) || !std::isfinite(intensity_hi) ||
        !std::isfinite(phase_smoothness) || !std::isfinite(noise_std))
      raise(ErrorKind::config, "PhantomSpec: parameters must be finite");
  }
};

namespace detail {

struct Ellipse {
  double cy, cx;   // center, pixels
  double ay, ax;   // semi-axes, pixels
  double theta;    // rotation
  double value;    // additive intensity
};

/// Smooth random phase field: superposition of plane waves whose wavevectors
/// have std 1/correlation_length per component, so features span roughly the
/// requested length scale.
struct PhaseField {
  static constexpr int kWaves = 12;
  double kx[kWaves], ky[kWaves], psi[kWaves];
  double amp = 0.0;

  static PhaseField sample(Rng& rng, double correlation_length) {
    PhaseField f;
    for (int i = 0; i < kWaves; ++i) {
      f.ky[i] = rng.normal() / correlation_length;
      f.kx[i] = rng.normal() / correlation_length;
      f.psi[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    f.amp = 1.2 * std::sqrt(2.0 / kWaves);
    return f;
  }

  double eval(double y, double x) const {
    double s = 0.0;
    for (int i = 0; i < kWaves; ++i)
      s += std::cos(ky[i] * y + kx[i] * x + psi[i]);
    return amp * s;
  }
};

inline std::vector<Ellipse> sample_ellipses(Rng& rng, int n, int h, int w,
                                            double lo, double hi) {
  std::vector<Ellipse> out;
  out.reserve(static_cast<size_t>(n));
  const double m = std::min(h, w);
  for (int i = 0; i < n; ++i) {
    Ellipse e;
    e.cy = rng.uniform(0.2 * h, 0.8 * h);
    e.cx = rng.uniform(0.2 * w, 0.8 * w);
    e.ay = rng.uniform(0.08 * m, 0.28 * m);
    e.ax = rng.uniform(0.08 * m, 0.28 * m);
    e.theta = rng.uniform(0.0, std::numbers::pi);
    e.value = rng.uniform(lo, hi);
    out.push_back(e);
  }
  return out;
}

/// Rasterizes the ellipse sum with a ~1 px soft edge.
inline RealGrid rasterize_ellipses(const std::vector<Ellipse>& ellipses, int h,
                                   int w, double axis_scale,
                                   double intensity_scale) {
  RealGrid img(h, w, 0.0);
  for (const auto& e : ellipses) {
    const double c = std::cos(e.theta), s = std::sin(e.theta);
    const double ay = e.ay * axis_scale, ax = e.ax * axis_scale;
    if (ay < 0.5 || ax < 0.5) continue;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double dy = y - e.cy, dx = x - e.cx;
        const double u = (c * dx + s * dy) / ax;
        const double v = (-s * dx + c * dy) / ay;
        const double r = std::sqrt(u * u + v * v);
        // soft edge over ~1 px of the minor axis
        const double edge = 1.0 / std::min(ay, ax);
        const double t = std::clamp((1.0 - r) / edge, 0.0, 1.0);
        if (t > 0.0) img.at(y, x) += e.value * intensity_scale * t;
      }
    }
  }
  return img;
}

} // namespace detail

/// Complex-valued phantom slice: ellipse intensities times exp(i*phase),
/// the phase a smooth random field. Deterministic in spec.seed.
inline ComplexGrid gen_phantom_image(int height, int width,
                                     const PhantomSpec& spec) {
  spec.validate();
  if (height < 16 || width < 16)
    raise(ErrorKind::config, "gen_phantom_image: dimensions must be >= 16");
  Rng rng(spec.seed);
  const auto ellipses = detail::sample_ellipses(
      rng, spec.num_ellipses, height, width, spec.intensity_lo,
      spec.intensity_hi);
  const auto phase = detail::PhaseField::sample(rng, spec.phase_smoothness);
  const RealGrid mag =
      detail::rasterize_ellipses(ellipses, height, width, 1.0, 1.0);
  ComplexGrid out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double p = phase.eval(y, x);
      out.at(y, x) = std::polar(mag.at(y, x), p);
    }
  return out;
}

/// Forward-simulates acquisition: centered orthonormal DFT of the image plus
/// complex Gaussian noise. Values are quantized to float32 so volumes round
/// trip the container format bit-exactly.
inline ComplexKSpace simulate_kspace(const ComplexGrid& image, double noise_std,
                                     uint64_t seed) {
  if (noise_std < 0.0)
    raise(ErrorKind::config, "simulate_kspace: noise_std must be >= 0");
  ComplexKSpace k = fft2c(image);
  Rng rng(seed);
  if (noise_std > 0.0) {
    for (auto& v : k.data())
      v += std::complex<double>(rng.normal(0.0, noise_std),
                                rng.normal(0.0, noise_std));
  }
  for (auto& v : k.data())
    v = std::complex<double>(static_cast<double>(static_cast<float>(v.real())),
                             static_cast<double>(static_cast<float>(v.imag())));
  return k;
}

} // namespace dualdomain
