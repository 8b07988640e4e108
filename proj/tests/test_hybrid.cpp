#include <catch2/catch.hpp>

#include <thread>

#include "dualdomain/hybrid.hpp"
#include "dualdomain/loss.hpp"
#include "dualdomain/phantom.hpp"

using namespace dualdomain;
using nn::ParamRef;

namespace {

Tensor<double> random_tensor(int c, int h, int w, Rng& rng) {
  Tensor<double> t(c, h, w);
  for (auto& v : t.v) v = rng.normal();
  return t;
}

UNetConfig tiny_freq(int levels = 1, int base = 4) {
  UNetConfig cfg;
  cfg.levels = levels;
  cfg.base_channels = base;
  cfg.kernel_size = 5;
  cfg.in_channels = 2;
  cfg.out_channels = 2;
  cfg.residual = true;
  return cfg;
}

UNetConfig tiny_image(int levels = 1, int base = 4, bool residual = true) {
  UNetConfig cfg;
  cfg.levels = levels;
  cfg.base_channels = base;
  cfg.kernel_size = 3;
  cfg.in_channels = 1;
  cfg.out_channels = 1;
  cfg.residual = residual;
  return cfg;
}

} // namespace

TEST_CASE("bridge equals the literal primitive composition", "[hybrid]") {
  Rng rng(3);
  const NormStats kstats{0.2, 1.7};
  const NormStats istats{0.4, 0.9};
  const Tensor<double> in = random_tensor(2, 12, 12, rng);

  const Tensor<double> out = bridge_forward(in, kstats, istats);

  const ComplexGrid d = denormalize(nn::tensor_to_complex(in), kstats);
  const RealGrid expect = normalize(magnitude(ifft2c(d)), istats);
  for (size_t i = 0; i < expect.size(); ++i)
    CHECK(out.v[i] == Approx(expect.data()[i]).margin(1e-6));
}

TEST_CASE("bridge with identity stats inverts fft2c for magnitude images",
          "[hybrid]") {
  Rng rng(5);
  ComplexGrid f(16, 16);
  for (auto& v : f.data()) v = std::abs(rng.normal()) + 0.05; // real, >= 0
  const Tensor<double> in = nn::complex_to_tensor<double>(fft2c(f));
  const Tensor<double> out =
      bridge_forward(in, NormStats{0.0, 1.0}, NormStats{0.0, 1.0});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      CHECK(out.at(0, y, x) == Approx(f.at(y, x).real()).margin(1e-6));
}

TEST_CASE("bridge jacobian-vector products match finite differences",
          "[hybrid]") {
  Rng rng(7);
  const NormStats kstats{0.13, 2.2};
  const NormStats istats{0.8, 1.4};
  Tensor<double> x = random_tensor(2, 16, 16, rng);
  const Tensor<double> u = random_tensor(1, 16, 16, rng); // downstream weights

  BridgeCache cache;
  (void)bridge_forward(x, kstats, istats, cache);
  const Tensor<double> g = bridge_backward(u, cache, kstats, istats);

  auto loss = [&] {
    const Tensor<double> y = bridge_forward(x, kstats, istats);
    double s = 0.0;
    for (size_t i = 0; i < y.v.size(); ++i) s += y.v[i] * u.v[i];
    return s;
  };

  Rng pick(11);
  int tested = 0;
  while (tested < 200) {
    const size_t i =
        static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(x.v.size()) - 1));
    const double keep = x.v[i];
    const double h = 1e-3;
    x.v[i] = keep + h;
    const double up = loss();
    x.v[i] = keep - h;
    const double dn = loss();
    x.v[i] = keep;
    const double want = (up - dn) / (2.0 * h);
    const double got = g.v[i];
    const double rel =
        std::abs(want - got) / std::max({std::abs(want), std::abs(got), 1e-12});
    CHECK(rel < 1e-4);
    ++tested;
  }
}

TEST_CASE("bridge gradient is zero (finite) at a zero pixel", "[hybrid]") {
  const NormStats unit{0.0, 1.0};
  Tensor<double> x(2, 4, 4); // all zeros -> ifft2c is all zeros
  BridgeCache cache;
  (void)bridge_forward(x, unit, unit, cache);
  Tensor<double> u(1, 4, 4);
  for (auto& v : u.v) v = 1.0;
  const Tensor<double> g = bridge_backward(u, cache, unit, unit);
  for (const auto& v : g.v) {
    CHECK(std::isfinite(v));
    CHECK(v == 0.0);
  }
}

TEST_CASE("hybrid at init reproduces the zero-filled reconstruction",
          "[hybrid]") {
  PhantomSpec spec;
  spec.seed = 9;
  const ComplexGrid img = gen_phantom_image(32, 32, spec);
  const ComplexKSpace full = simulate_kspace(img, 0.01, 10);
  const SamplingMask mask = make_gaussian_mask(32, 32, 4.0, 0.1, 11);
  const ComplexKSpace ku = apply_mask(full, mask);

  const NormStats kstats = compute_norm_stats(std::vector<ComplexGrid>{ku});
  const MagnitudeImage zf = zero_filled_recon(ku);
  const NormStats istats = compute_norm_stats(std::vector<RealGrid>{zf});

  // zero-initialized residual freq net + identity-behaving image net
  HybridModel<double> model(tiny_freq(2), tiny_image(2, 4, true), kstats,
                            istats, 123);
  const auto out = model.forward(ku);
  for (size_t i = 0; i < zf.size(); ++i)
    CHECK(out.fhat.data()[i] == Approx(zf.data()[i]).margin(1e-6));

  SECTION("frequency net output equals its input (residual zero start)") {
    const Tensor<double> x0 =
        nn::complex_to_tensor<double>(normalize(ku, kstats));
    for (size_t i = 0; i < x0.v.size(); ++i)
      CHECK(out.fhat_norm_kspace.v[i] == x0.v[i]);
  }

  SECTION("f0 equals the zero-filled image") {
    for (size_t i = 0; i < zf.size(); ++i)
      CHECK(out.f0.data()[i] == Approx(zf.data()[i]).margin(1e-6));
  }
}

TEST_CASE("hybrid parameter budget is enforced", "[hybrid]") {
  const NormStats s{0.0, 1.0};
  UNetConfig huge = tiny_freq(1, 4);
  huge.base_channels = 4096; // ~1.6e9 params in the first blocks alone
  CHECK_THROWS_AS(HybridModel<double>(huge, tiny_image(), s, s, 1), Error);
}

TEST_CASE("hybrid end-to-end loss gradients match finite differences",
          "[hybrid]") {
  PhantomSpec spec;
  spec.seed = 21;
  const ComplexGrid img = gen_phantom_image(16, 16, spec);
  const ComplexKSpace full = simulate_kspace(img, 0.005, 22);
  const SamplingMask mask = make_gaussian_mask(16, 16, 2.0, 0.15, 23);
  const ComplexKSpace ku = apply_mask(full, mask);

  const NormStats kstats = compute_norm_stats(std::vector<ComplexGrid>{ku});
  const MagnitudeImage zf = zero_filled_recon(ku);
  const NormStats istats = compute_norm_stats(std::vector<RealGrid>{zf});

  HybridModel<double> model(tiny_freq(1, 4), tiny_image(1, 4, false), kstats,
                            istats, 31);
  std::vector<ParamRef<double>> params;
  model.collect_params(params);
  Rng wrng(32);
  for (auto& p : params)
    for (auto& v : *p.value) v += 0.05 * wrng.normal();

  const Tensor<double> f_norm =
      nn::complex_to_tensor<double>(normalize(full, kstats));
  const MagnitudeImage f_ref = magnitude(ifft2c(full));
  const double w1 = 0.001, w2 = 0.999;

  auto loss_value = [&] {
    const auto out = model.forward(ku);
    return dual_domain_loss(out.fhat_norm_kspace, f_norm, out.fhat, f_ref, w1,
                            w2)
        .total;
  };

  HybridModel<double>::Cache cache;
  const auto out = model.forward(ku, cache);
  nn::Tensor<double> g_k;
  RealGrid g_img;
  (void)dual_domain_loss_grad(out.fhat_norm_kspace, f_norm, out.fhat, f_ref,
                              w1, w2, 1.0, g_k, g_img);
  model.zero_grad();
  model.backward(g_img, g_k, cache);

  SECTION("every parameter gradient exists and is finite") {
    size_t total = 0;
    for (auto& p : params)
      for (const double g : *p.grad) {
        REQUIRE(std::isfinite(g));
        ++total;
      }
    CHECK(total == model.param_count());
  }

  Rng pick(33);
  int checked = 0, ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const size_t pi =
        static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(params.size()) - 1));
    auto& vec = *params[pi].value;
    const size_t vi =
        static_cast<size_t>(pick.uniform_int(0, static_cast<int64_t>(vec.size()) - 1));
    const double keep = vec[vi];
    const double h = 1e-5;
    vec[vi] = keep + h;
    const double up = loss_value();
    vec[vi] = keep - h;
    const double dn = loss_value();
    vec[vi] = keep;
    const double want = (up - dn) / (2.0 * h);
    const double got = (*params[pi].grad)[vi];
    const double rel =
        std::abs(want - got) / std::max({std::abs(want), std::abs(got), 1e-10});
    ++checked;
    if (rel < 1e-3) ++ok;
  }
  CHECK(checked == 200);
  CHECK(ok >= 190); // >= 95%: ReLU/clamp kinks may spoil isolated samples
}

TEST_CASE("concurrent inference is safe and agrees with serial", "[hybrid]") {
  PhantomSpec spec;
  spec.seed = 55;
  const ComplexGrid img = gen_phantom_image(32, 32, spec);
  const ComplexKSpace full = simulate_kspace(img, 0.01, 56);
  const SamplingMask mask = make_gaussian_mask(32, 32, 4.0, 0.1, 57);
  const ComplexKSpace ku = apply_mask(full, mask);
  const NormStats kstats = compute_norm_stats(std::vector<ComplexGrid>{ku});
  const MagnitudeImage zf = zero_filled_recon(ku);
  const NormStats istats = compute_norm_stats(std::vector<RealGrid>{zf});
  const HybridModel<double> model(tiny_freq(2), tiny_image(2, 4, true), kstats,
                                  istats, 58);

  const MagnitudeImage serial = model.forward(ku).fhat;
  std::vector<MagnitudeImage> results(4);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back(
        [&, t] { results[static_cast<size_t>(t)] = model.forward(ku).fhat; });
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r == serial);
}

TEST_CASE("baseline at zero init reproduces its zero-filled input", "[hybrid]") {
  PhantomSpec spec;
  spec.seed = 41;
  const ComplexGrid img = gen_phantom_image(32, 32, spec);
  const ComplexKSpace full = simulate_kspace(img, 0.01, 42);
  const SamplingMask mask = make_gaussian_mask(32, 32, 4.0, 0.1, 43);
  const ComplexKSpace ku = apply_mask(full, mask);
  const MagnitudeImage zf = zero_filled_recon(ku);
  const NormStats istats = compute_norm_stats(std::vector<RealGrid>{zf});

  UNetConfig cfg = tiny_image(2, 4, true);
  BaselineModel<double> model(cfg, istats, 44);
  const MagnitudeImage out = model.forward(ku);
  for (size_t i = 0; i < zf.size(); ++i)
    CHECK(out.data()[i] == Approx(zf.data()[i]).margin(1e-6));
}
