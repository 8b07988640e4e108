#include <catch2/catch.hpp>

#include "dualdomain/nn/adam.hpp"
#include "dualdomain/nn/unet.hpp"

using namespace dualdomain;
using namespace dualdomain::nn;

namespace {

Tensor<double> random_tensor(int c, int h, int w, Rng& rng) {
  Tensor<double> t(c, h, w);
  for (auto& v : t.v) v = rng.normal();
  return t;
}

/// Central finite difference of sum(weights * f(x)) wrt one scalar.
template <typename Fn>
double fd(Fn&& f, double& slot, double h = 1e-6) {
  const double keep = slot;
  slot = keep + h;
  const double up = f();
  slot = keep - h;
  const double dn = f();
  slot = keep;
  return (up - dn) / (2.0 * h);
}

double weighted_sum(const Tensor<double>& t, const Tensor<double>& weights) {
  double s = 0.0;
  for (size_t i = 0; i < t.v.size(); ++i) s += t.v[i] * weights.v[i];
  return s;
}

} // namespace

TEST_CASE("conv2d matches a hand-computed 3x3 example", "[nn]") {
  Conv2d<double> conv(1, 1, 3);
  std::vector<ParamRef<double>> params;
  conv.collect_params("c", params);
  // identity-ish kernel: center tap 2, bias 0.5
  auto& w = *params[0].value;
  std::fill(w.begin(), w.end(), 0.0);
  w[4] = 2.0;
  (*params[1].value)[0] = 0.5;
  Tensor<double> x(1, 2, 2);
  x.v = {1.0, 2.0, 3.0, 4.0};
  const Tensor<double> y = conv.forward(x);
  CHECK(y.v[0] == Approx(2.5));
  CHECK(y.v[1] == Approx(4.5));
  CHECK(y.v[2] == Approx(6.5));
  CHECK(y.v[3] == Approx(8.5));
}

TEST_CASE("conv2d gradients agree with finite differences", "[nn]") {
  Rng rng(5);
  Conv2d<double> conv(3, 2, 3);
  conv.init(rng);
  Tensor<double> x = random_tensor(3, 6, 5, rng);
  Tensor<double> gy = random_tensor(2, 6, 5, rng);

  conv.zero_grad();
  const Tensor<double> gx = conv.backward(x, gy);

  std::vector<ParamRef<double>> params;
  conv.collect_params("c", params);
  auto loss = [&] { return weighted_sum(conv.forward(x), gy); };

  // input gradient
  for (size_t i = 0; i < x.v.size(); i += 7) {
    const double want = fd(loss, x.v[i]);
    CHECK(gx.v[i] == Approx(want).margin(1e-6));
  }
  // weight + bias gradients
  for (auto& p : params) {
    for (size_t i = 0; i < p.value->size(); i += 5) {
      const double want = fd(loss, (*p.value)[i]);
      CHECK((*p.grad)[i] == Approx(want).margin(1e-6));
    }
  }
}

TEST_CASE("upconv2 doubles resolution and passes gradient checks", "[nn]") {
  Rng rng(7);
  UpConv2<double> up(3, 2);
  up.init(rng);
  Tensor<double> x = random_tensor(3, 4, 5, rng);
  const Tensor<double> y = up.forward(x);
  CHECK(y.c == 2);
  CHECK(y.h == 8);
  CHECK(y.w == 10);

  Tensor<double> gy = random_tensor(2, 8, 10, rng);
  up.zero_grad();
  const Tensor<double> gx = up.backward(x, gy);
  auto loss = [&] { return weighted_sum(up.forward(x), gy); };
  for (size_t i = 0; i < x.v.size(); i += 5) {
    CHECK(gx.v[i] == Approx(fd(loss, x.v[i])).margin(1e-6));
  }
  std::vector<ParamRef<double>> params;
  up.collect_params("u", params);
  for (auto& p : params)
    for (size_t i = 0; i < p.value->size(); i += 3)
      CHECK((*p.grad)[i] == Approx(fd(loss, (*p.value)[i])).margin(1e-6));
}

TEST_CASE("maxpool picks maxima and routes gradient to them", "[nn]") {
  Tensor<double> x(1, 2, 4);
  x.v = {1.0, 5.0, 2.0, 0.0, 3.0, 4.0, -1.0, 7.0};
  std::vector<uint8_t> idx;
  const Tensor<double> y = maxpool2_forward(x, idx);
  CHECK(y.h == 1);
  CHECK(y.w == 2);
  CHECK(y.v[0] == 5.0);
  CHECK(y.v[1] == 7.0);
  Tensor<double> gy(1, 1, 2);
  gy.v = {10.0, 20.0};
  const Tensor<double> gx = maxpool2_backward(gy, idx, 2, 4);
  CHECK(gx.v[1] == 10.0); // the 5.0
  CHECK(gx.v[7] == 20.0); // the 7.0
  double total = 0.0;
  for (double v : gx.v) total += v;
  CHECK(total == 30.0);
}

TEST_CASE("unet preserves shape and validates divisibility", "[nn]") {
  UNetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 4;
  cfg.kernel_size = 3;
  cfg.in_channels = 1;
  cfg.out_channels = 1;
  cfg.residual = true;
  Rng rng(11);
  UNet<double> net(cfg, rng);
  Rng data_rng(12);
  const Tensor<double> x = random_tensor(1, 64, 64, data_rng);
  const Tensor<double> y = net.forward(x);
  CHECK(y.c == 1);
  CHECK(y.h == 64);
  CHECK(y.w == 64);

  const Tensor<double> bad = random_tensor(1, 44, 64, data_rng);
  CHECK_THROWS_AS(net.forward(bad), Error);
}

TEST_CASE("a residual unet with zeroed head is the identity", "[nn]") {
  UNetConfig cfg;
  cfg.levels = 2;
  cfg.base_channels = 4;
  cfg.kernel_size = 5;
  cfg.in_channels = 2;
  cfg.out_channels = 2;
  cfg.residual = true;
  Rng rng(13);
  UNet<double> net(cfg, rng); // head zero-initialized by construction
  Rng data_rng(14);
  const Tensor<double> x = random_tensor(2, 16, 16, data_rng);
  const Tensor<double> y = net.forward(x);
  for (size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == x.v[i]);
}

TEST_CASE("unet parameter count is stable and scale free", "[nn]") {
  UNetConfig cfg;
  cfg.levels = 3;
  cfg.base_channels = 32;
  cfg.kernel_size = 3;
  Rng r1(1), r2(2);
  UNet<double> a(cfg, r1), b(cfg, r2);
  CHECK(a.param_count() == b.param_count());
  CHECK(a.param_count() == unet_param_count(cfg));
  CHECK(a.param_count() > 1'000'000); // full-width default is ~1.9M params

  // parameter count is independent of image size (fully convolutional)
  Rng data_rng(3);
  const size_t before = a.param_count();
  (void)a.forward(random_tensor(1, 32, 32, data_rng));
  (void)a.forward(random_tensor(1, 64, 64, data_rng));
  CHECK(a.param_count() == before);
}

TEST_CASE("unet end-to-end gradients agree with finite differences", "[nn]") {
  UNetConfig cfg;
  cfg.levels = 1;
  cfg.base_channels = 3;
  cfg.kernel_size = 3;
  cfg.in_channels = 2;
  cfg.out_channels = 2;
  cfg.residual = true;
  Rng rng(17);
  UNet<double> net(cfg, rng);

  // randomize every parameter (incl. the zero head) for full gradient flow
  std::vector<ParamRef<double>> params;
  net.collect_params("net", params);
  Rng wrng(18);
  for (auto& p : params)
    for (auto& v : *p.value) v += 0.05 * wrng.normal();

  Rng data_rng(19);
  const Tensor<double> x = random_tensor(2, 8, 8, data_rng);
  const Tensor<double> gw = random_tensor(2, 8, 8, data_rng);

  typename UNet<double>::Cache cache;
  (void)net.forward(x, cache);
  net.zero_grad();
  const Tensor<double> gx = net.backward(gw, cache);

  auto loss = [&] { return weighted_sum(net.forward(x), gw); };

  int checked = 0, ok = 0;
  for (auto& p : params) {
    for (size_t i = 0; i < p.value->size(); i += std::max<size_t>(1, p.value->size() / 8)) {
      const double want = fd(loss, (*p.value)[i], 1e-5);
      const double got = (*p.grad)[i];
      ++checked;
      if (std::abs(want - got) <= 1e-4 * std::max({1.0, std::abs(want), std::abs(got)}))
        ++ok;
    }
  }
  // ReLU kinks can spoil isolated finite differences; nearly all must agree
  CHECK(checked > 50);
  CHECK(ok >= checked * 95 / 100);

  for (size_t i = 0; i < x.v.size(); i += 9) {
    const double want = fd(loss, const_cast<Tensor<double>&>(x).v[i], 1e-5);
    CHECK(gx.v[i] == Approx(want).margin(2e-4));
  }
}

TEST_CASE("adam descends a quadratic", "[nn]") {
  std::vector<double> theta{5.0, -3.0};
  std::vector<double> grad{0.0, 0.0};
  std::vector<ParamRef<double>> params{{"theta", &theta, &grad}};
  Adam<double> adam(params, 0.05);
  for (int it = 0; it < 400; ++it) {
    grad[0] = 2.0 * theta[0];
    grad[1] = 2.0 * theta[1];
    adam.step();
  }
  CHECK(std::abs(theta[0]) < 0.05);
  CHECK(std::abs(theta[1]) < 0.05);
}
