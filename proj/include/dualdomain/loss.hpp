#pragma once

#include <algorithm>
#include <cmath>

#include "dualdomain/grid.hpp"
#include "dualdomain/nn/tensor.hpp"

namespace dualdomain {

namespace detail {

struct NrmseParts {
  double rmse;
  double range; // max - min of the reference
  double value() const { return rmse / range; }
};

/// RMSE plus reference range over flat arrays (a k-space tensor contributes
/// both channels; the range spans both).
template <typename P, typename R>
NrmseParts nrmse_parts(const P* pred, const R* ref, size_t n, const char* who) {
  double lo = static_cast<double>(ref[0]), hi = lo, sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = static_cast<double>(ref[i]);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
    const double d = static_cast<double>(pred[i]) - r;
    sq += d * d;
  }
  const double range = hi - lo;
  if (!(range > 0.0))
    raise(ErrorKind::loss_degenerate,
          std::string(who) + ": constant reference (zero range)");
  return {std::sqrt(sq / static_cast<double>(n)), range};
}

} // namespace detail

struct DualLossValue {
  double total = 0.0;
  double kspace_nrmse = 0.0;
  double image_nrmse = 0.0;
};

/// Weighted dual-domain training loss for one sample:
///   w1 * NRMSE(k-space, 2-channel real representation)
/// + w2 * NRMSE(image).
/// The k-space range convention is max-min over both channels of the
/// reference. Batch averaging is the caller's job.
template <typename T>
DualLossValue dual_domain_loss(const nn::Tensor<T>& fhat_kspace_norm,
                               const nn::Tensor<T>& f_kspace_norm,
                               const RealGrid& fhat, const RealGrid& f,
                               double w1, double w2) {
  if (w1 < 0.0 || w2 < 0.0 || !(w1 + w2 > 0.0))
    raise(ErrorKind::config, "dual_domain_loss: weights must be >= 0, w1+w2 > 0");
  if (!fhat_kspace_norm.same_shape(f_kspace_norm))
    raise(ErrorKind::invalid_input, "dual_domain_loss: k-space shape mismatch");
  require_same_shape(fhat, f, "dual_domain_loss");

  const auto k = detail::nrmse_parts(fhat_kspace_norm.v.data(),
                                     f_kspace_norm.v.data(),
                                     fhat_kspace_norm.v.size(),
                                     "dual_domain_loss (k-space)");
  const auto im = detail::nrmse_parts(fhat.data().data(), f.data().data(),
                                      fhat.size(), "dual_domain_loss (image)");
  DualLossValue out;
  out.kspace_nrmse = k.value();
  out.image_nrmse = im.value();
  out.total = w1 * out.kspace_nrmse + w2 * out.image_nrmse;
  return out;
}

/// Loss plus gradients wrt both predictions, scaled by `upstream` (use 1/N
/// for batch averaging). The NRMSE gradient at an exact match is taken as 0.
template <typename T>
DualLossValue dual_domain_loss_grad(const nn::Tensor<T>& fhat_kspace_norm,
                                    const nn::Tensor<T>& f_kspace_norm,
                                    const RealGrid& fhat, const RealGrid& f,
                                    double w1, double w2, double upstream,
                                    nn::Tensor<T>& g_kspace, RealGrid& g_image) {
  const DualLossValue val =
      dual_domain_loss(fhat_kspace_norm, f_kspace_norm, fhat, f, w1, w2);

  const auto k = detail::nrmse_parts(fhat_kspace_norm.v.data(),
                                     f_kspace_norm.v.data(),
                                     fhat_kspace_norm.v.size(), "loss");
  g_kspace = nn::Tensor<T>(fhat_kspace_norm.c, fhat_kspace_norm.h,
                           fhat_kspace_norm.w);
  if (k.rmse > 0.0) {
    const double scale =
        upstream * w1 /
        (static_cast<double>(fhat_kspace_norm.v.size()) * k.rmse * k.range);
    for (size_t i = 0; i < g_kspace.v.size(); ++i)
      g_kspace.v[i] = static_cast<T>(
          scale * (static_cast<double>(fhat_kspace_norm.v[i]) -
                   static_cast<double>(f_kspace_norm.v[i])));
  }

  const auto im = detail::nrmse_parts(fhat.data().data(), f.data().data(),
                                      fhat.size(), "loss");
  g_image = RealGrid(fhat.height(), fhat.width());
  if (im.rmse > 0.0) {
    const double scale =
        upstream * w2 / (static_cast<double>(fhat.size()) * im.rmse * im.range);
    for (size_t i = 0; i < g_image.size(); ++i)
      g_image.data()[i] = scale * (fhat.data()[i] - f.data()[i]);
  }
  return val;
}

} // namespace dualdomain
