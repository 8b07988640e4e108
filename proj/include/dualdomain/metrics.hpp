#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dualdomain/grid.hpp"

namespace dualdomain {

namespace detail {

inline double rmse_flat(const double* a, const double* b, size_t n) {
  double sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::sqrt(sq / static_cast<double>(n));
}

inline std::pair<double, double> min_max(const RealGrid& g) {
  double lo = g.data()[0], hi = lo;
  for (double v : g.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

} // namespace detail

/// Root-mean-square error normalized by the reference range (max - min).
inline double nrmse(const MagnitudeImage& fhat, const MagnitudeImage& f) {
  require_same_shape(fhat, f, "nrmse");
  require_finite(fhat, "nrmse");
  require_finite(f, "nrmse");
  const auto [lo, hi] = detail::min_max(f);
  if (!(hi > lo))
    raise(ErrorKind::degenerate_reference, "nrmse: constant reference image");
  return detail::rmse_flat(fhat.data().data(), f.data().data(), f.size()) /
         (hi - lo);
}

/// Peak signal-to-noise ratio in dB, peak taken over the reference.
/// Identical images give +infinity (the infinite-psnr signal).
inline double psnr(const MagnitudeImage& fhat, const MagnitudeImage& f) {
  require_same_shape(fhat, f, "psnr");
  require_finite(fhat, "psnr");
  require_finite(f, "psnr");
  const auto [lo, hi] = detail::min_max(f);
  if (!(hi > 0.0))
    raise(ErrorKind::degenerate_reference, "psnr: reference peak is not positive");
  const double r = detail::rmse_flat(fhat.data().data(), f.data().data(), f.size());
  if (r == 0.0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(hi / r);
}

constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;
constexpr int kSsimWindow = 7;

/// Mean structural similarity over sliding uniform windows (valid positions
/// only), with the usual c1 = (k1 L)^2, c2 = (k2 L)^2 stabilizers. Window
/// statistics come from prefix sums; the test suite cross-checks them against
/// a direct per-window evaluation.
inline double ssim(const MagnitudeImage& fhat, const MagnitudeImage& f,
                   double dynamic_range, int window = kSsimWindow) {
  require_same_shape(fhat, f, "ssim");
  require_finite(fhat, "ssim");
  require_finite(f, "ssim");
  if (!(dynamic_range > 0.0))
    raise(ErrorKind::degenerate_reference, "ssim: dynamic_range must be > 0");
  const int h = f.height(), w = f.width();
  if (window > h || window > w)
    raise(ErrorKind::config, "ssim: window larger than image");

  const double c1 = (kSsimK1 * dynamic_range) * (kSsimK1 * dynamic_range);
  const double c2 = (kSsimK2 * dynamic_range) * (kSsimK2 * dynamic_range);

  // identical inputs have SSIM exactly 1 by definition; guarantee it rather
  // than relying on the window statistics cancelling bit-for-bit
  if (fhat.data() == f.data()) return 1.0;

  // prefix sums over x, y, x^2, y^2, xy (x = prediction, y = reference)
  const int pw = w + 1;
  std::vector<double> sx(static_cast<size_t>(h + 1) * pw, 0.0), sy = sx,
                      sxx = sx, syy = sx, sxy = sx;
  for (int yy = 0; yy < h; ++yy)
    for (int xx = 0; xx < w; ++xx) {
      const size_t i = static_cast<size_t>(yy + 1) * pw + (xx + 1);
      const size_t up = i - pw, left = i - 1, diag = up - 1;
      const double a = fhat.at(yy, xx), b = f.at(yy, xx);
      sx[i] = a + sx[up] + sx[left] - sx[diag];
      sy[i] = b + sy[up] + sy[left] - sy[diag];
      sxx[i] = a * a + sxx[up] + sxx[left] - sxx[diag];
      syy[i] = b * b + syy[up] + syy[left] - syy[diag];
      sxy[i] = a * b + sxy[up] + sxy[left] - sxy[diag];
    }
  auto window_sum = [&](const std::vector<double>& s, int y0, int x0) {
    const size_t tl = static_cast<size_t>(y0) * pw + x0;
    const size_t br = static_cast<size_t>(y0 + window) * pw + (x0 + window);
    const size_t tr = static_cast<size_t>(y0) * pw + (x0 + window);
    const size_t bl = static_cast<size_t>(y0 + window) * pw + x0;
    return s[br] - s[tr] - s[bl] + s[tl];
  };

  const double n = static_cast<double>(window) * window;
  double acc = 0.0;
  int count = 0;
  for (int y0 = 0; y0 + window <= h; ++y0)
    for (int x0 = 0; x0 + window <= w; ++x0) {
      const double mx = window_sum(sx, y0, x0) / n;
      const double my = window_sum(sy, y0, x0) / n;
      // round-off can push these a hair negative; c2 dominates that noise,
      // and leaving them unclamped keeps ssim(f, f) == 1 exactly
      const double vx = window_sum(sxx, y0, x0) / n - mx * mx;
      const double vy = window_sum(syy, y0, x0) / n - my * my;
      const double cxy = window_sum(sxy, y0, x0) / n - mx * my;
      const double num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
      const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      acc += num / den;
      ++count;
    }
  // the stabilized form is bounded; clamp strips last-ulp round-off only
  return std::clamp(acc / count, -1.0, 1.0);
}

/// dynamic_range defaults to the reference range.
inline double ssim(const MagnitudeImage& fhat, const MagnitudeImage& f) {
  const auto [lo, hi] = detail::min_max(f);
  if (!(hi > lo))
    raise(ErrorKind::degenerate_reference, "ssim: constant reference image");
  return ssim(fhat, f, hi - lo);
}

// -----------------------------------------------------------------------------
// Paired two-sided t-test.

namespace detail {

inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

/// Regularized incomplete beta I_x(a, b).
inline double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                             std::lgamma(b) + a * std::log(x) +
                             b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

} // namespace detail

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int dof = 0;
};

/// Two-sided paired t-test on equal-length score lists.
inline TTestResult paired_t_test(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() != b.size())
    raise(ErrorKind::invalid_input, "paired_t_test: length mismatch");
  const size_t n = a.size();
  if (n < 2)
    raise(ErrorKind::invalid_input, "paired_t_test: need at least 2 pairs");
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    sq += d * d;
  }
  const double var = sq / static_cast<double>(n - 1); // sample variance
  if (!(var > 0.0))
    raise(ErrorKind::degenerate_test,
          "paired_t_test: zero variance in the differences");
  TTestResult r;
  r.dof = static_cast<int>(n) - 1;
  r.t = mean / std::sqrt(var / static_cast<double>(n));
  const double nu = static_cast<double>(r.dof);
  r.p = detail::betai(nu / 2.0, 0.5, nu / (nu + r.t * r.t));
  return r;
}

} // namespace dualdomain
