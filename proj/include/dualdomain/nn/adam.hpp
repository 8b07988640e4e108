#pragma once

#include <cmath>
#include <vector>

#include "dualdomain/nn/tensor.hpp"

namespace dualdomain::nn {

/// Adam optimizer over a fixed parameter set. Moments are kept in double so
/// float models update stably; the stepping order is fixed, so runs are
/// reproducible.
template <typename T>
class Adam {
public:
  Adam(std::vector<ParamRef<T>> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    size_t n = 0;
    for (const auto& p : params_) n += p.value->size();
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    size_t off = 0;
    for (const auto& p : params_) {
      const size_t n = p.value->size();
      for (size_t i = 0; i < n; ++i) {
        const double g = static_cast<double>((*p.grad)[i]);
        double& m = m_[off + i];
        double& v = v_[off + i];
        m = b1_ * m + (1.0 - b1_) * g;
        v = b2_ * v + (1.0 - b2_) * g * g;
        const double update = lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
        (*p.value)[i] = static_cast<T>(static_cast<double>((*p.value)[i]) - update);
      }
      off += n;
    }
  }

private:
  std::vector<ParamRef<T>> params_;
  std::vector<double> m_, v_;
  int64_t t_ = 0;
  double lr_, b1_, b2_, eps_;
};

} // namespace dualdomain::nn
