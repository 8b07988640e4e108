#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dualdomain/errors.hpp"
#include "dualdomain/grid.hpp"

namespace dualdomain::nn {

/// Channels-first activation tensor (c, h, w), row-major planes.
template <typename T>
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, T fill = T{})
      : c(c_), h(h_), w(w_),
        v(static_cast<size_t>(c_) * h_ * w_, fill) {}

  size_t size() const { return v.size(); }
  size_t plane_size() const { return static_cast<size_t>(h) * w; }

  T* plane(int ci) { return v.data() + ci * plane_size(); }
  const T* plane(int ci) const { return v.data() + ci * plane_size(); }

  T& at(int ci, int y, int x) { return v[(static_cast<size_t>(ci) * h + y) * w + x]; }
  const T& at(int ci, int y, int x) const {
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const {
    return c == o.c && h == o.h && w == o.w;
  }
};

template <typename T>
void require_shape(const Tensor<T>& t, int c, int h, int w, const char* who) {
  if (t.c != c || t.h != h || t.w != w)
    raise(ErrorKind::invalid_input,
          std::string(who) + ": expected tensor " + std::to_string(c) + "x" +
              std::to_string(h) + "x" + std::to_string(w) + ", got " +
              std::to_string(t.c) + "x" + std::to_string(t.h) + "x" +
              std::to_string(t.w));
}

/// Named view of one parameter vector and its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value;
  std::vector<T>* grad;
};

// conversions between domain grids and tensors ------------------------------

template <typename T>
Tensor<T> complex_to_tensor(const ComplexGrid& g) {
  Tensor<T> t(2, g.height(), g.width());
  T* re = t.plane(0);
  T* im = t.plane(1);
  for (size_t i = 0; i < g.size(); ++i) {
    re[i] = static_cast<T>(g.data()[i].real());
    im[i] = static_cast<T>(g.data()[i].imag());
  }
  return t;
}

template <typename T>
ComplexGrid tensor_to_complex(const Tensor<T>& t) {
  if (t.c != 2)
    raise(ErrorKind::invalid_input, "tensor_to_complex: expected 2 channels");
  ComplexGrid g(t.h, t.w);
  const T* re = t.plane(0);
  const T* im = t.plane(1);
  for (size_t i = 0; i < g.size(); ++i)
    g.data()[i] = std::complex<double>(static_cast<double>(re[i]),
                                       static_cast<double>(im[i]));
  return g;
}

template <typename T>
Tensor<T> real_to_tensor(const RealGrid& g) {
  Tensor<T> t(1, g.height(), g.width());
  for (size_t i = 0; i < g.size(); ++i)
    t.v[i] = static_cast<T>(g.data()[i]);
  return t;
}

template <typename T>
RealGrid tensor_to_real(const Tensor<T>& t) {
  if (t.c != 1)
    raise(ErrorKind::invalid_input, "tensor_to_real: expected 1 channel");
  RealGrid g(t.h, t.w);
  for (size_t i = 0; i < g.size(); ++i)
    g.data()[i] = static_cast<double>(t.v[i]);
  return g;
}

} // namespace dualdomain::nn
