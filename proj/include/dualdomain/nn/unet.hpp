#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dualdomain/nn/layers.hpp"

namespace dualdomain::nn {

struct UNetConfig {
  int levels = 3;        // number of down-sampling stages
  int base_channels = 32;
  int kernel_size = 3;
  int in_channels = 1;
  int out_channels = 1;
  bool residual = false; // output = input (or 1x1 projection) + net(input)

  void validate() const {
    if (levels < 1) raise(ErrorKind::config, "UNetConfig: levels must be >= 1");
    if (base_channels < 1)
      raise(ErrorKind::config, "UNetConfig: base_channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
      raise(ErrorKind::config, "UNetConfig: kernel_size must be odd");
    if (in_channels < 1 || out_channels < 1)
      raise(ErrorKind::config, "UNetConfig: channel counts must be >= 1");
  }
};

/// Trainable parameter count implied by a config, without building the net.
inline size_t unet_param_count(const UNetConfig& cfg) {
  auto conv = [](int k, int in, int out) {
    return static_cast<size_t>(out) * in * k * k + static_cast<size_t>(out);
  };
  const int L = cfg.levels, k = cfg.kernel_size;
  auto ch = [&](int level) { return cfg.base_channels << level; };
  size_t n = 0;
  for (int j = 0; j <= L; ++j) {
    n += conv(k, j == 0 ? cfg.in_channels : ch(j - 1), ch(j));
    n += conv(k, ch(j), ch(j));
  }
  for (int j = 0; j < L; ++j) {
    n += static_cast<size_t>(ch(j + 1)) * ch(j) * 4 + static_cast<size_t>(ch(j));
    n += conv(k, 2 * ch(j), ch(j));
    n += conv(k, ch(j), ch(j));
  }
  n += conv(1, cfg.base_channels, cfg.out_channels);
  if (cfg.residual && cfg.in_channels != cfg.out_channels)
    n += conv(1, cfg.in_channels, cfg.out_channels);
  return n;
}

/// Encoder-decoder with skip concatenations: two conv+ReLU blocks per stage,
/// channel doubling per level, 2x2 max-pool down, 2x2 transposed-conv up,
/// 1x1 output head. With `residual` the head starts zeroed, so a fresh
/// network is the identity map.
template <typename T>
class UNet {
public:
  UNet() = default;

  UNet(const UNetConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    const int L = cfg.levels;
    auto ch = [&](int level) { return cfg.base_channels << level; };

    enc1_.reserve(L + 1);
    enc2_.reserve(L + 1);
    for (int j = 0; j <= L; ++j) {
      const int in = j == 0 ? cfg.in_channels : ch(j - 1);
      enc1_.emplace_back(in, ch(j), cfg.kernel_size);
      enc2_.emplace_back(ch(j), ch(j), cfg.kernel_size);
      enc1_.back().init(rng);
      enc2_.back().init(rng);
    }
    up_.reserve(L);
    dec1_.reserve(L);
    dec2_.reserve(L);
    for (int j = 0; j < L; ++j) {
      up_.emplace_back(ch(j + 1), ch(j));
      up_.back().init(rng);
      dec1_.emplace_back(2 * ch(j), ch(j), cfg.kernel_size);
      dec2_.emplace_back(ch(j), ch(j), cfg.kernel_size);
      dec1_.back().init(rng);
      dec2_.back().init(rng);
    }
    head_ = Conv2d<T>(cfg.base_channels, cfg.out_channels, 1);
    if (cfg.residual) {
      head_.init_zero();
      if (cfg.in_channels != cfg.out_channels) {
        proj_.emplace(cfg.in_channels, cfg.out_channels, 1);
        proj_->init(rng);
      }
    } else {
      head_.init(rng);
    }
  }

  const UNetConfig& config() const { return cfg_; }

  /// Everything the backward pass needs from one forward call. Keeping it
  /// outside the model makes concurrent inference safe.
  struct Cache {
    Tensor<T> input;
    std::vector<Tensor<T>> enc_x, enc_y1, enc_y2; // per encoder stage
    std::vector<std::vector<uint8_t>> pool_idx;   // per level
    std::vector<Tensor<T>> up_x, dec_x, dec_y1, dec_y2;
  };

  Tensor<T> forward(const Tensor<T>& x, Cache& cache) const {
    const int L = cfg_.levels;
    if (x.c != cfg_.in_channels)
      raise(ErrorKind::invalid_input, "UNet: input channel mismatch");
    const int div = 1 << L;
    if (x.h % div != 0 || x.w % div != 0)
      raise(ErrorKind::invalid_input,
            "UNet: spatial dims " + std::to_string(x.h) + "x" +
                std::to_string(x.w) + " not divisible by 2^levels (" +
                std::to_string(div) + ")");

    cache.input = x;
    cache.enc_x.resize(L + 1);
    cache.enc_y1.resize(L + 1);
    cache.enc_y2.resize(L + 1);
    cache.pool_idx.resize(L);
    cache.up_x.resize(L);
    cache.dec_x.resize(L);
    cache.dec_y1.resize(L);
    cache.dec_y2.resize(L);

    Tensor<T> cur = x;
    for (int j = 0; j <= L; ++j) {
      if (j > 0) cur = maxpool2_forward(cur, cache.pool_idx[j - 1]);
      cache.enc_x[j] = cur;
      Tensor<T> a = enc1_[j].forward(cur);
      relu_inplace(a);
      cache.enc_y1[j] = a;
      Tensor<T> b = enc2_[j].forward(a);
      relu_inplace(b);
      cache.enc_y2[j] = b;
      cur = std::move(b);
    }
    for (int j = L - 1; j >= 0; --j) {
      cache.up_x[j] = cur;
      Tensor<T> u = up_[j].forward(cur);
      cache.dec_x[j] = concat(u, cache.enc_y2[j]);
      Tensor<T> a = dec1_[j].forward(cache.dec_x[j]);
      relu_inplace(a);
      cache.dec_y1[j] = a;
      Tensor<T> b = dec2_[j].forward(a);
      relu_inplace(b);
      cache.dec_y2[j] = b;
      cur = std::move(b);
    }
    Tensor<T> out = head_.forward(cur);
    if (cfg_.residual) {
      if (proj_) {
        const Tensor<T> p = proj_->forward(x);
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += p.v[i];
      } else {
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += x.v[i];
      }
    }
    return out;
  }

  /// Inference-only forward with a local cache.
  Tensor<T> forward(const Tensor<T>& x) const {
    Cache cache;
    return forward(x, cache);
  }

  /// Accumulates parameter gradients; returns the input gradient.
  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache) {
    const int L = cfg_.levels;
    Tensor<T> g = head_.backward(cache.dec_y2[0], gy);
    std::vector<Tensor<T>> g_skip(L);
    for (int j = 0; j < L; ++j) {
      relu_backward_inplace(g, cache.dec_y2[j]);
      g = dec2_[j].backward(cache.dec_y1[j], g);
      relu_backward_inplace(g, cache.dec_y1[j]);
      g = dec1_[j].backward(cache.dec_x[j], g);
      Tensor<T> g_up;
      split(g, cfg_.base_channels << j, g_up, g_skip[j]);
      g = up_[j].backward(cache.up_x[j], g_up);
    }
    for (int j = L; j >= 0; --j) {
      if (j < L)
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += g_skip[j].v[i];
      relu_backward_inplace(g, cache.enc_y2[j]);
      g = enc2_[j].backward(cache.enc_y1[j], g);
      relu_backward_inplace(g, cache.enc_y1[j]);
      g = enc1_[j].backward(cache.enc_x[j], g);
      if (j > 0)
        g = maxpool2_backward(g, cache.pool_idx[j - 1],
                              cache.enc_x[j - 1].h, cache.enc_x[j - 1].w);
    }
    if (cfg_.residual) {
      if (proj_) {
        Tensor<T> gp = proj_->backward(cache.input, gy);
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += gp.v[i];
      } else {
        for (size_t i = 0; i < g.v.size(); ++i) g.v[i] += gy.v[i];
      }
    }
    return g;
  }

  void zero_grad() {
    for (auto& c : enc1_) c.zero_grad();
    for (auto& c : enc2_) c.zero_grad();
    for (auto& u : up_) u.zero_grad();
    for (auto& c : dec1_) c.zero_grad();
    for (auto& c : dec2_) c.zero_grad();
    head_.zero_grad();
    if (proj_) proj_->zero_grad();
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    for (size_t j = 0; j < enc1_.size(); ++j) {
      enc1_[j].collect_params(prefix + ".enc" + std::to_string(j) + ".conv1", out);
      enc2_[j].collect_params(prefix + ".enc" + std::to_string(j) + ".conv2", out);
    }
    for (size_t j = 0; j < up_.size(); ++j) {
      up_[j].collect_params(prefix + ".up" + std::to_string(j), out);
      dec1_[j].collect_params(prefix + ".dec" + std::to_string(j) + ".conv1", out);
      dec2_[j].collect_params(prefix + ".dec" + std::to_string(j) + ".conv2", out);
    }
    head_.collect_params(prefix + ".head", out);
    if (proj_) proj_->collect_params(prefix + ".proj", out);
  }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& c : enc1_) n += c.param_count();
    for (const auto& c : enc2_) n += c.param_count();
    for (const auto& u : up_) n += u.param_count();
    for (const auto& c : dec1_) n += c.param_count();
    for (const auto& c : dec2_) n += c.param_count();
    n += head_.param_count();
    if (proj_) n += proj_->param_count();
    return n;
  }

private:
  static Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
  }

  static void split(const Tensor<T>& g, int first_c, Tensor<T>& ga,
                    Tensor<T>& gb) {
    ga = Tensor<T>(first_c, g.h, g.w);
    gb = Tensor<T>(g.c - first_c, g.h, g.w);
    std::copy(g.v.begin(), g.v.begin() + ga.v.size(), ga.v.begin());
    std::copy(g.v.begin() + ga.v.size(), g.v.end(), gb.v.begin());
  }

  UNetConfig cfg_;
  std::vector<Conv2d<T>> enc1_, enc2_;
  std::vector<UpConv2<T>> up_;
  std::vector<Conv2d<T>> dec1_, dec2_;
  Conv2d<T> head_;
  std::optional<Conv2d<T>> proj_;
};

} // namespace dualdomain::nn
