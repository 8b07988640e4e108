#pragma once

#include <cmath>
#include <cstdint>

#include "dualdomain/fft.hpp"
#include "dualdomain/kspace.hpp"
#include "dualdomain/nn/unet.hpp"

namespace dualdomain {

using nn::Tensor;
using nn::UNet;
using nn::UNetConfig;

// -----------------------------------------------------------------------------
// The bridge: denormalize -> centered iDFT -> magnitude -> normalize.
// No trainable parameters; differentiable everywhere, with the magnitude
// subgradient taken as 0 at exact zeros. Internals run in double regardless
// of the model scalar type.

struct BridgeCache {
  ComplexGrid z; // ifft2c output, needed for the magnitude gradient
};

template <typename T>
Tensor<T> bridge_forward(const Tensor<T>& fhat_kspace_norm,
                         const NormStats& kspace_stats,
                         const NormStats& image_stats, BridgeCache& cache) {
  if (fhat_kspace_norm.c != 2)
    raise(ErrorKind::invalid_input, "bridge_forward: expected 2 channels");
  const ComplexGrid denorm =
      denormalize(nn::tensor_to_complex(fhat_kspace_norm), kspace_stats);
  cache.z = ifft2c(denorm);
  Tensor<T> out(1, fhat_kspace_norm.h, fhat_kspace_norm.w);
  for (size_t i = 0; i < cache.z.size(); ++i)
    out.v[i] = static_cast<T>((std::abs(cache.z.data()[i]) - image_stats.mean) /
                              image_stats.std);
  return out;
}

template <typename T>
Tensor<T> bridge_forward(const Tensor<T>& fhat_kspace_norm,
                         const NormStats& kspace_stats,
                         const NormStats& image_stats) {
  BridgeCache cache;
  return bridge_forward(fhat_kspace_norm, kspace_stats, image_stats, cache);
}

/// Adjoint of the bridge. The centered orthonormal transform is unitary, so
/// the gradient passes back through the iDFT as a forward fft2c.
template <typename T>
Tensor<T> bridge_backward(const Tensor<T>& g_out, const BridgeCache& cache,
                          const NormStats& kspace_stats,
                          const NormStats& image_stats) {
  const int h = g_out.h, w = g_out.w;
  ComplexGrid gz(h, w);
  for (size_t i = 0; i < gz.size(); ++i) {
    const double gm = static_cast<double>(g_out.v[i]) / image_stats.std;
    const std::complex<double> z = cache.z.data()[i];
    const double az = std::abs(z);
    gz.data()[i] = az > 0.0 ? gm * z / az : std::complex<double>(0.0, 0.0);
  }
  const ComplexGrid gd = fft2c(gz);
  Tensor<T> g_in(2, h, w);
  T* re = g_in.plane(0);
  T* im = g_in.plane(1);
  for (size_t i = 0; i < gd.size(); ++i) {
    re[i] = static_cast<T>(gd.data()[i].real() * kspace_stats.std);
    im[i] = static_cast<T>(gd.data()[i].imag() * kspace_stats.std);
  }
  return g_in;
}

// -----------------------------------------------------------------------------

inline UNetConfig default_freq_net_config() {
  UNetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 32;
  cfg.kernel_size = 5;
  cfg.in_channels = 2;
  cfg.out_channels = 2;
  cfg.residual = true;
  return cfg;
}

inline UNetConfig default_image_net_config() {
  UNetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 32;
  cfg.kernel_size = 3;
  cfg.in_channels = 1;
  cfg.out_channels = 1;
  cfg.residual = false;
  return cfg;
}

constexpr size_t kMaxHybridParams = 100'000'000;

/// The full reconstruction model: k-space residual U-net, magnitude-iDFT
/// bridge, image-domain U-net, with the normalization statistics baked in.
template <typename T>
class HybridModel {
public:
  HybridModel() = default;

  HybridModel(const UNetConfig& freq_cfg, const UNetConfig& image_cfg,
              const NormStats& kspace_stats, const NormStats& image_stats,
              uint64_t init_seed)
      : kspace_stats_(kspace_stats), image_stats_(image_stats) {
    if (freq_cfg.in_channels != 2 || freq_cfg.out_channels != 2)
      raise(ErrorKind::config, "HybridModel: frequency net must be 2->2 channels");
    if (image_cfg.in_channels != 1 || image_cfg.out_channels != 1)
      raise(ErrorKind::config, "HybridModel: image net must be 1->1 channels");
    kspace_stats.validate();
    image_stats.validate();
    if (nn::unet_param_count(freq_cfg) + nn::unet_param_count(image_cfg) >=
        kMaxHybridParams)
      raise(ErrorKind::config, "HybridModel: parameter budget exceeded");
    Rng rng(init_seed);
    freq_net_ = UNet<T>(freq_cfg, rng);
    image_net_ = UNet<T>(image_cfg, rng);
  }

  UNet<T>& freq_net() { return freq_net_; }
  const UNet<T>& freq_net() const { return freq_net_; }
  UNet<T>& image_net() { return image_net_; }
  const UNet<T>& image_net() const { return image_net_; }
  const NormStats& kspace_stats() const { return kspace_stats_; }
  const NormStats& image_stats() const { return image_stats_; }

  size_t param_count() const {
    return freq_net_.param_count() + image_net_.param_count();
  }

  void zero_grad() {
    freq_net_.zero_grad();
    image_net_.zero_grad();
  }

  void collect_params(std::vector<nn::ParamRef<T>>& out) {
    freq_net_.collect_params("freq", out);
    image_net_.collect_params("image", out);
  }

  struct Cache {
    typename UNet<T>::Cache freq, image;
    BridgeCache bridge;
    Tensor<T> fhat_norm;   // frequency net output (normalized k-space)
    Tensor<T> x1;          // bridge output (normalized image)
    Tensor<T> y;           // image net output (normalized image)
    RealGrid fhat_raw;     // denormalized, pre-clamp
  };

  struct Output {
    MagnitudeImage fhat;        // final reconstruction, clamped to >= 0
    Tensor<T> fhat_norm_kspace; // frequency net estimate, normalized domain
    MagnitudeImage f0;          // bridge magnitude (Eq.-4 style intermediate)
  };

  /// Full pipeline on one undersampled slice.
  Output forward(const ComplexKSpace& undersampled, Cache& cache) const {
    const Tensor<T> x0 =
        nn::complex_to_tensor<T>(normalize(undersampled, kspace_stats_));
    cache.fhat_norm = freq_net_.forward(x0, cache.freq);
    cache.x1 =
        bridge_forward(cache.fhat_norm, kspace_stats_, image_stats_, cache.bridge);
    cache.y = image_net_.forward(cache.x1, cache.image);

    Output out;
    out.fhat_norm_kspace = cache.fhat_norm;
    out.f0 = magnitude(cache.bridge.z);
    cache.fhat_raw = RealGrid(cache.y.h, cache.y.w);
    out.fhat = MagnitudeImage(cache.y.h, cache.y.w);
    for (size_t i = 0; i < cache.y.v.size(); ++i) {
      const double raw =
          static_cast<double>(cache.y.v[i]) * image_stats_.std + image_stats_.mean;
      cache.fhat_raw.data()[i] = raw;
      out.fhat.data()[i] = raw > 0.0 ? raw : 0.0;
    }
    return out;
  }

  Output forward(const ComplexKSpace& undersampled) const {
    Cache cache;
    return forward(undersampled, cache);
  }

  /// g_fhat: loss gradient wrt the clamped reconstruction.
  /// g_fhat_norm_kspace: loss gradient wrt the frequency net output.
  /// Accumulates parameter gradients in both nets.
  void backward(const RealGrid& g_fhat, const Tensor<T>& g_fhat_norm_kspace,
                Cache& cache) {
    Tensor<T> gy(1, cache.y.h, cache.y.w);
    for (size_t i = 0; i < gy.v.size(); ++i) {
      // clamp subgradient: zero where the raw output was clamped away
      const double pass = cache.fhat_raw.data()[i] > 0.0 ? 1.0 : 0.0;
      gy.v[i] = static_cast<T>(g_fhat.data()[i] * pass * image_stats_.std);
    }
    Tensor<T> g_x1 = image_net_.backward(gy, cache.image);
    Tensor<T> g_freq =
        bridge_backward(g_x1, cache.bridge, kspace_stats_, image_stats_);
    for (size_t i = 0; i < g_freq.v.size(); ++i)
      g_freq.v[i] += g_fhat_norm_kspace.v[i];
    freq_net_.backward(g_freq, cache.freq);
  }

private:
  UNet<T> freq_net_, image_net_;
  NormStats kspace_stats_;
  NormStats image_stats_;
};

/// Convenience matching the pipeline contract: returns the reconstruction
/// and the frequency-domain estimate for one slice.
template <typename T>
typename HybridModel<T>::Output hybrid_forward(const HybridModel<T>& model,
                                               const ComplexKSpace& undersampled) {
  return model.forward(undersampled);
}

// -----------------------------------------------------------------------------
// Baseline comparator: image-domain-only residual U-net mapping the
// zero-filled reconstruction to a refined image.

inline UNetConfig default_baseline_config() {
  UNetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 32;
  cfg.kernel_size = 3;
  cfg.in_channels = 1;
  cfg.out_channels = 1;
  cfg.residual = true;
  return cfg;
}

template <typename T>
class BaselineModel {
public:
  BaselineModel() = default;

  BaselineModel(const UNetConfig& cfg, const NormStats& image_stats,
                uint64_t init_seed)
      : image_stats_(image_stats) {
    if (cfg.in_channels != 1 || cfg.out_channels != 1)
      raise(ErrorKind::config, "BaselineModel: net must be 1->1 channels");
    image_stats.validate();
    Rng rng(init_seed);
    net_ = UNet<T>(cfg, rng);
  }

  UNet<T>& net() { return net_; }
  const UNet<T>& net() const { return net_; }
  const NormStats& image_stats() const { return image_stats_; }

  struct Cache {
    typename UNet<T>::Cache net;
    Tensor<T> y;
    RealGrid fhat_raw;
  };

  MagnitudeImage forward(const ComplexKSpace& undersampled, Cache& cache) const {
    const Tensor<T> x0 = nn::real_to_tensor<T>(
        normalize(zero_filled_recon(undersampled), image_stats_));
    cache.y = net_.forward(x0, cache.net);
    cache.fhat_raw = RealGrid(cache.y.h, cache.y.w);
    MagnitudeImage out(cache.y.h, cache.y.w);
    for (size_t i = 0; i < cache.y.v.size(); ++i) {
      const double raw =
          static_cast<double>(cache.y.v[i]) * image_stats_.std + image_stats_.mean;
      cache.fhat_raw.data()[i] = raw;
      out.data()[i] = raw > 0.0 ? raw : 0.0;
    }
    return out;
  }

  MagnitudeImage forward(const ComplexKSpace& undersampled) const {
    Cache cache;
    return forward(undersampled, cache);
  }

  void backward(const RealGrid& g_fhat, Cache& cache) {
    Tensor<T> gy(1, cache.y.h, cache.y.w);
    for (size_t i = 0; i < gy.v.size(); ++i) {
      const double pass = cache.fhat_raw.data()[i] > 0.0 ? 1.0 : 0.0;
      gy.v[i] = static_cast<T>(g_fhat.data()[i] * pass * image_stats_.std);
    }
    net_.backward(gy, cache.net);
  }

  void zero_grad() { net_.zero_grad(); }
  void collect_params(std::vector<nn::ParamRef<T>>& out) {
    net_.collect_params("baseline", out);
  }
  size_t param_count() const { return net_.param_count(); }

private:
  UNet<T> net_;
  NormStats image_stats_;
};

} // namespace dualdomain
