#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dualdomain/nn/tensor.hpp"
#include "dualdomain/rng.hpp"
#include "dualdomain/threads.hpp"

namespace dualdomain::nn {

namespace detail {
/// Fan-in-scaled uniform init, U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
template <typename T>
void init_uniform(std::vector<T>& w, int fan_in, Rng& rng) {
  const double limit = std::sqrt(3.0 / fan_in);
  for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
}

template <typename T>
Tensor<T> pad_tensor(const Tensor<T>& x, int pad) {
  if (pad == 0) return x;
  Tensor<T> xp(x.c, x.h + 2 * pad, x.w + 2 * pad, T{});
  for (int c = 0; c < x.c; ++c)
    for (int y = 0; y < x.h; ++y) {
      const T* src = x.plane(c) + static_cast<size_t>(y) * x.w;
      T* dst = xp.plane(c) + static_cast<size_t>(y + pad) * xp.w + pad;
      std::copy(src, src + x.w, dst);
    }
  return xp;
}
} // namespace detail

/// Same-padded 2D convolution, stride 1, odd square kernel.
/// Weight layout: w[oc][ic][ky][kx]; forward/backward loops keep per-output
/// accumulation inside one worker so results do not depend on thread count.
template <typename T>
class Conv2d {
public:
  Conv2d() = default;
  Conv2d(int in_c, int out_c, int k)
      : in_c_(in_c), out_c_(out_c), k_(k), pad_(k / 2),
        w_(static_cast<size_t>(out_c) * in_c * k * k, T{}),
        b_(static_cast<size_t>(out_c), T{}),
        gw_(w_.size(), T{}), gb_(b_.size(), T{}) {
    if (k % 2 == 0)
      raise(ErrorKind::config, "Conv2d: kernel size must be odd");
  }

  void init(Rng& rng) { detail::init_uniform(w_, in_c_ * k_ * k_, rng); }
  void init_zero() { std::fill(w_.begin(), w_.end(), T{}); }

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.c != in_c_)
      raise(ErrorKind::invalid_input, "Conv2d: channel mismatch");
    const Tensor<T> xp = detail::pad_tensor(x, pad_);
    Tensor<T> y(out_c_, x.h, x.w);
    parallel_for(out_c_, [&](int64_t oc0, int64_t oc1) {
      for (int oc = static_cast<int>(oc0); oc < oc1; ++oc) {
        T* yp = y.plane(oc);
        std::fill(yp, yp + y.plane_size(), b_[oc]);
        for (int ic = 0; ic < in_c_; ++ic) {
          const T* xpp = xp.plane(ic);
          const T* wrow = w_.data() +
                          (static_cast<size_t>(oc) * in_c_ + ic) * k_ * k_;
          for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx) {
              const T wv = wrow[ky * k_ + kx];
              if (wv == T{}) continue;
              for (int yy = 0; yy < x.h; ++yy) {
                const T* src = xpp + static_cast<size_t>(yy + ky) * xp.w + kx;
                T* dst = yp + static_cast<size_t>(yy) * x.w;
                for (int xx = 0; xx < x.w; ++xx) dst[xx] += wv * src[xx];
              }
            }
        }
      }
    });
    return y;
  }

  /// Accumulates weight/bias gradients and returns the input gradient.
  /// `x` must be the tensor passed to the matching forward call.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy) {
    const Tensor<T> xp = detail::pad_tensor(x, pad_);
    const Tensor<T> gyp = detail::pad_tensor(gy, pad_);

    // dW[oc][ic][ky][kx] += sum_{y,x} gy[oc][y][x] * xp[ic][y+ky][x+kx]
    parallel_for(out_c_, [&](int64_t oc0, int64_t oc1) {
      for (int oc = static_cast<int>(oc0); oc < oc1; ++oc) {
        const T* gp = gy.plane(oc);
        double bsum = 0.0;
        for (size_t i = 0; i < gy.plane_size(); ++i)
          bsum += static_cast<double>(gp[i]);
        gb_[oc] += static_cast<T>(bsum);
        for (int ic = 0; ic < in_c_; ++ic) {
          const T* xpp = xp.plane(ic);
          T* grow = gw_.data() +
                    (static_cast<size_t>(oc) * in_c_ + ic) * k_ * k_;
          for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx) {
              double acc = 0.0;
              for (int yy = 0; yy < gy.h; ++yy) {
                const T* g = gp + static_cast<size_t>(yy) * gy.w;
                const T* s = xpp + static_cast<size_t>(yy + ky) * xp.w + kx;
                for (int xx = 0; xx < gy.w; ++xx)
                  acc += static_cast<double>(g[xx]) * static_cast<double>(s[xx]);
              }
              grow[ky * k_ + kx] += static_cast<T>(acc);
            }
        }
      }
    });

    // dX: full correlation of gy with the flipped kernel
    Tensor<T> gx(in_c_, x.h, x.w, T{});
    parallel_for(in_c_, [&](int64_t ic0, int64_t ic1) {
      for (int ic = static_cast<int>(ic0); ic < ic1; ++ic) {
        T* gxp = gx.plane(ic);
        for (int oc = 0; oc < out_c_; ++oc) {
          const T* gpp = gyp.plane(oc);
          const T* wrow = w_.data() +
                          (static_cast<size_t>(oc) * in_c_ + ic) * k_ * k_;
          for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx) {
              const T wv = wrow[(k_ - 1 - ky) * k_ + (k_ - 1 - kx)];
              if (wv == T{}) continue;
              for (int yy = 0; yy < x.h; ++yy) {
                const T* src = gpp + static_cast<size_t>(yy + ky) * gyp.w + kx;
                T* dst = gxp + static_cast<size_t>(yy) * x.w;
                for (int xx = 0; xx < x.w; ++xx) dst[xx] += wv * src[xx];
              }
            }
        }
      }
    });
    return gx;
  }

  void zero_grad() {
    std::fill(gw_.begin(), gw_.end(), T{});
    std::fill(gb_.begin(), gb_.end(), T{});
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_});
    out.push_back({prefix + ".bias", &b_, &gb_});
  }

  size_t param_count() const { return w_.size() + b_.size(); }

private:
  int in_c_ = 0, out_c_ = 0, k_ = 1, pad_ = 0;
  std::vector<T> w_, b_, gw_, gb_;
};

template <typename T>
void relu_inplace(Tensor<T>& t) {
  for (auto& v : t.v)
    if (v < T{}) v = T{};
}

/// Gradient gated by the cached post-activation output (out > 0 <=> in > 0).
template <typename T>
void relu_backward_inplace(Tensor<T>& g, const Tensor<T>& out) {
  for (size_t i = 0; i < g.v.size(); ++i)
    if (!(out.v[i] > T{})) g.v[i] = T{};
}

/// 2x2 max pooling, stride 2. Argmax offsets are cached for the backward pass.
template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& x, std::vector<uint8_t>& idx) {
  if (x.h % 2 != 0 || x.w % 2 != 0)
    raise(ErrorKind::invalid_input, "maxpool2: spatial dims must be even");
  Tensor<T> y(x.c, x.h / 2, x.w / 2);
  idx.assign(y.size(), 0);
  for (int c = 0; c < x.c; ++c)
    for (int yy = 0; yy < y.h; ++yy)
      for (int xx = 0; xx < y.w; ++xx) {
        T best = x.at(c, 2 * yy, 2 * xx);
        uint8_t arg = 0;
        for (uint8_t d = 1; d < 4; ++d) {
          const T v = x.at(c, 2 * yy + (d >> 1), 2 * xx + (d & 1));
          if (v > best) {
            best = v;
            arg = d;
          }
        }
        y.at(c, yy, xx) = best;
        idx[(static_cast<size_t>(c) * y.h + yy) * y.w + xx] = arg;
      }
  return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& gy, const std::vector<uint8_t>& idx,
                            int in_h, int in_w) {
  Tensor<T> gx(gy.c, in_h, in_w, T{});
  for (int c = 0; c < gy.c; ++c)
    for (int yy = 0; yy < gy.h; ++yy)
      for (int xx = 0; xx < gy.w; ++xx) {
        const uint8_t d = idx[(static_cast<size_t>(c) * gy.h + yy) * gy.w + xx];
        gx.at(c, 2 * yy + (d >> 1), 2 * xx + (d & 1)) = gy.at(c, yy, xx);
      }
  return gx;
}

/// Transposed 2x2 convolution with stride 2 (non-overlapping learned
/// upsampling). Weight layout: w[ic][oc][dy][dx].
template <typename T>
class UpConv2 {
public:
  UpConv2() = default;
  UpConv2(int in_c, int out_c)
      : in_c_(in_c), out_c_(out_c),
        w_(static_cast<size_t>(in_c) * out_c * 4, T{}),
        b_(static_cast<size_t>(out_c), T{}),
        gw_(w_.size(), T{}), gb_(b_.size(), T{}) {}

  void init(Rng& rng) { detail::init_uniform(w_, in_c_, rng); }

  Tensor<T> forward(const Tensor<T>& x) const {
    if (x.c != in_c_)
      raise(ErrorKind::invalid_input, "UpConv2: channel mismatch");
    Tensor<T> y(out_c_, x.h * 2, x.w * 2);
    parallel_for(out_c_, [&](int64_t oc0, int64_t oc1) {
      for (int oc = static_cast<int>(oc0); oc < oc1; ++oc) {
        T* yp = y.plane(oc);
        std::fill(yp, yp + y.plane_size(), b_[oc]);
        for (int ic = 0; ic < in_c_; ++ic) {
          const T* xpp = x.plane(ic);
          const T* wq = w_.data() + (static_cast<size_t>(ic) * out_c_ + oc) * 4;
          for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx) {
              const T v = xpp[static_cast<size_t>(yy) * x.w + xx];
              T* base = yp + static_cast<size_t>(2 * yy) * y.w + 2 * xx;
              base[0] += v * wq[0];
              base[1] += v * wq[1];
              base[y.w] += v * wq[2];
              base[y.w + 1] += v * wq[3];
            }
        }
      }
    });
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& gy) {
    parallel_for(out_c_, [&](int64_t oc0, int64_t oc1) {
      for (int oc = static_cast<int>(oc0); oc < oc1; ++oc) {
        const T* gp = gy.plane(oc);
        double bsum = 0.0;
        for (size_t i = 0; i < gy.plane_size(); ++i)
          bsum += static_cast<double>(gp[i]);
        gb_[oc] += static_cast<T>(bsum);
      }
    });
    // dW and dX over input channels
    Tensor<T> gx(in_c_, x.h, x.w, T{});
    parallel_for(in_c_, [&](int64_t ic0, int64_t ic1) {
      for (int ic = static_cast<int>(ic0); ic < ic1; ++ic) {
        const T* xpp = x.plane(ic);
        T* gxp = gx.plane(ic);
        for (int oc = 0; oc < out_c_; ++oc) {
          const T* gp = gy.plane(oc);
          const T* wq = w_.data() + (static_cast<size_t>(ic) * out_c_ + oc) * 4;
          T* gwq = gw_.data() + (static_cast<size_t>(ic) * out_c_ + oc) * 4;
          double acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0;
          for (int yy = 0; yy < x.h; ++yy)
            for (int xx = 0; xx < x.w; ++xx) {
              const T v = xpp[static_cast<size_t>(yy) * x.w + xx];
              const T* gbase = gp + static_cast<size_t>(2 * yy) * gy.w + 2 * xx;
              acc0 += static_cast<double>(v) * gbase[0];
              acc1 += static_cast<double>(v) * gbase[1];
              acc2 += static_cast<double>(v) * gbase[gy.w];
              acc3 += static_cast<double>(v) * gbase[gy.w + 1];
              gxp[static_cast<size_t>(yy) * x.w + xx] +=
                  wq[0] * gbase[0] + wq[1] * gbase[1] + wq[2] * gbase[gy.w] +
                  wq[3] * gbase[gy.w + 1];
            }
          gwq[0] += static_cast<T>(acc0);
          gwq[1] += static_cast<T>(acc1);
          gwq[2] += static_cast<T>(acc2);
          gwq[3] += static_cast<T>(acc3);
        }
      }
    });
    return gx;
  }

  void zero_grad() {
    std::fill(gw_.begin(), gw_.end(), T{});
    std::fill(gb_.begin(), gb_.end(), T{});
  }

  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
    out.push_back({prefix + ".weight", &w_, &gw_});
    out.push_back({prefix + ".bias", &b_, &gb_});
  }

  size_t param_count() const { return w_.size() + b_.size(); }

private:
  int in_c_ = 0, out_c_ = 0;
  std::vector<T> w_, b_, gw_, gb_;
};

} // namespace dualdomain::nn
