#include <catch2/catch.hpp>

#include "dualdomain/kspace.hpp"
#include "dualdomain/rng.hpp"

using namespace dualdomain;

namespace {
ComplexGrid random_grid(int h, int w, Rng& rng) {
  ComplexGrid g(h, w);
  for (auto& v : g.data())
    v = std::complex<double>(rng.normal(), rng.normal());
  return g;
}
} // namespace

TEST_CASE("gaussian mask meets the sampling budget at 4x and 5x", "[kspace]") {
  for (double r : {4.0, 5.0}) {
    const SamplingMask m = make_gaussian_mask(256, 256, r, 0.08, 0);
    const auto budget = static_cast<size_t>(std::llround(256.0 * 256.0 / r));
    CHECK(m.sampled_count() == budget);
    CHECK(m.sampled_fraction() == Approx(1.0 / r).margin(0.02));
  }
  const SamplingMask m4 = make_gaussian_mask(256, 256, 4.0, 0.08, 0);
  CHECK(m4.sampled_fraction() >= 0.23);
  CHECK(m4.sampled_fraction() <= 0.27);
  const SamplingMask m5 = make_gaussian_mask(256, 256, 5.0, 0.08, 0);
  CHECK(m5.sampled_fraction() >= 0.18);
  CHECK(m5.sampled_fraction() <= 0.22);
}

TEST_CASE("gaussian mask central block is fully sampled", "[kspace]") {
  const SamplingMask m = make_gaussian_mask(256, 256, 4.0, 0.08, 42);
  const int ch = static_cast<int>(std::lround(0.08 * 256)); // 20
  const int y0 = (256 - ch) / 2;
  for (int y = y0; y < y0 + ch; ++y)
    for (int x = y0; x < y0 + ch; ++x) CHECK(m.pattern.at(y, x) == 1);
  for (uint8_t v : m.pattern.data()) CHECK((v == 0 || v == 1));
}

TEST_CASE("gaussian mask is deterministic per seed", "[kspace]") {
  const SamplingMask a = make_gaussian_mask(128, 96, 4.0, 0.08, 1234);
  const SamplingMask b = make_gaussian_mask(128, 96, 4.0, 0.08, 1234);
  const SamplingMask c = make_gaussian_mask(128, 96, 4.0, 0.08, 1235);
  CHECK(a.pattern == b.pattern);
  CHECK_FALSE(a.pattern == c.pattern);
}

TEST_CASE("gaussian mask samples concentrate near the center", "[kspace]") {
  const SamplingMask m = make_gaussian_mask(128, 128, 5.0, 0.04, 7);
  size_t inner = 0, outer = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const double d2 = (y - 64.0) * (y - 64.0) + (x - 64.0) * (x - 64.0);
      if (m.pattern.at(y, x)) (d2 < 32.0 * 32.0 ? inner : outer) += 1;
    }
  CHECK(inner > outer); // the Gaussian weighting favors low frequencies
}

TEST_CASE("infeasible center block is a configuration error", "[kspace]") {
  // budget at 4x on 256^2 is 16384 cells; a 0.9 center block needs 52900
  CHECK_THROWS_AS(make_gaussian_mask(256, 256, 4.0, 0.9, 0), Error);
  CHECK_THROWS_AS(make_gaussian_mask(64, 64, 8.0, 0.5, 0), Error);
  CHECK_THROWS_AS(make_gaussian_mask(64, 64, 0.5, 0.08, 0), Error);  // R <= 1
  CHECK_THROWS_AS(make_gaussian_mask(64, 64, 4.0, 1.5, 0), Error);   // cf >= 1
}

TEST_CASE("apply_mask zeroes exactly the unsampled locations", "[kspace]") {
  Rng rng(3);
  const ComplexGrid k = random_grid(32, 32, rng);
  const SamplingMask m = make_gaussian_mask(32, 32, 4.0, 0.1, 9);
  const ComplexGrid ku = apply_mask(k, m);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      if (m.pattern.at(y, x))
        CHECK(ku.at(y, x) == k.at(y, x));
      else
        CHECK(ku.at(y, x) == std::complex<double>(0.0, 0.0));
    }

  SECTION("identity and annihilator masks") {
    SamplingMask ones;
    ones.pattern = MaskGrid(32, 32, 1);
    CHECK(apply_mask(k, ones) == k);
    SamplingMask zeros;
    zeros.pattern = MaskGrid(32, 32, 0);
    const ComplexGrid z = apply_mask(k, zeros);
    for (const auto& v : z.data()) CHECK(v == std::complex<double>(0.0, 0.0));
  }

  SECTION("idempotence") {
    CHECK(apply_mask(ku, m) == ku);
  }

  SECTION("shape mismatch rejected") {
    const ComplexGrid small = random_grid(16, 16, rng);
    CHECK_THROWS_AS(apply_mask(small, m), Error);
  }
}

TEST_CASE("norm stats use the population convention", "[kspace]") {
  RealGrid g(1, 2);
  g.at(0, 0) = 0.0;
  g.at(0, 1) = 2.0;
  const NormStats s = compute_norm_stats(std::vector<RealGrid>{g});
  CHECK(s.mean == Approx(1.0));
  CHECK(s.std == Approx(1.0));
}

TEST_CASE("norm stats of a symmetric sample have zero mean", "[kspace]") {
  RealGrid g(1, 2);
  g.at(0, 0) = -1.0;
  g.at(0, 1) = 1.0;
  const NormStats s = compute_norm_stats(std::vector<RealGrid>{g});
  CHECK(s.mean == Approx(0.0).margin(1e-15));
}

TEST_CASE("degenerate stats inputs are rejected", "[kspace]") {
  CHECK_THROWS_AS(compute_norm_stats(std::vector<RealGrid>{}), Error);
  RealGrid c(4, 4, 3.25);
  CHECK_THROWS_AS(compute_norm_stats(std::vector<RealGrid>{c, c}), Error);
}

TEST_CASE("complex stats pool real and imaginary parts", "[kspace]") {
  ComplexGrid g(1, 1);
  g.at(0, 0) = {0.0, 2.0};
  const NormStats s = compute_norm_stats(std::vector<ComplexGrid>{g});
  CHECK(s.mean == Approx(1.0));
  CHECK(s.std == Approx(1.0));
}

TEST_CASE("stats are order independent", "[kspace]") {
  Rng rng(17);
  std::vector<ComplexGrid> grids;
  for (int i = 0; i < 6; ++i) grids.push_back(random_grid(16, 16, rng));
  const NormStats a = compute_norm_stats(grids);
  std::reverse(grids.begin(), grids.end());
  const NormStats b = compute_norm_stats(grids);
  CHECK(a.mean == Approx(b.mean).epsilon(1e-12));
  CHECK(a.std == Approx(b.std).epsilon(1e-12));
}

TEST_CASE("normalize applies the affine map", "[kspace]") {
  RealGrid x(1, 2);
  x.at(0, 0) = 1.0;
  x.at(0, 1) = 3.0;
  const RealGrid y = normalize(x, NormStats{1.0, 2.0});
  CHECK(y.at(0, 0) == Approx(0.0));
  CHECK(y.at(0, 1) == Approx(1.0));

  const RealGrid idn = normalize(x, NormStats{0.0, 1.0});
  CHECK(idn.at(0, 0) == Approx(1.0));
  CHECK(idn.at(0, 1) == Approx(3.0));
}

TEST_CASE("denormalize applies the inverse affine map", "[kspace]") {
  RealGrid x(1, 2);
  x.at(0, 0) = 0.0;
  x.at(0, 1) = 1.0;
  const RealGrid y = denormalize(x, NormStats{1.0, 2.0});
  CHECK(y.at(0, 0) == Approx(1.0));
  CHECK(y.at(0, 1) == Approx(3.0));
}

TEST_CASE("denormalize inverts normalize within 1e-6", "[kspace]") {
  Rng rng(23);
  const ComplexGrid x = random_grid(24, 24, rng);
  const NormStats s{0.37, 2.9};
  const ComplexGrid rt = denormalize(normalize(x, s), s);
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(std::abs(rt.data()[i] - x.data()[i]) < 1e-6);
}

TEST_CASE("adding a k-space constant only perturbs the DC sample", "[kspace]") {
  Rng rng(29);
  const ComplexGrid k = random_grid(16, 16, rng);
  ComplexGrid shifted = k;
  const double mu = 0.8;
  for (auto& v : shifted.data()) v += mu;
  const ComplexGrid a = ifft2c(k);
  const ComplexGrid b = ifft2c(shifted);
  // difference is an impulse of mu*sqrt(N) at the spatial center
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const auto d = b.at(y, x) - a.at(y, x);
      if (y == 8 && x == 8)
        CHECK(std::abs(d - std::complex<double>(mu * 16.0, 0.0)) < 1e-9);
      else
        CHECK(std::abs(d) < 1e-9);
    }
}

TEST_CASE("zero-filled recon of fully sampled k-space recovers |f|", "[kspace]") {
  Rng rng(31);
  ComplexGrid img(16, 16);
  for (auto& v : img.data())
    v = std::polar(std::abs(rng.normal()) + 0.1, rng.uniform(0.0, 3.0));
  const MagnitudeImage ref = magnitude(img);
  const MagnitudeImage rec = zero_filled_recon(fft2c(img));
  for (size_t i = 0; i < ref.size(); ++i)
    CHECK(rec.data()[i] == Approx(ref.data()[i]).margin(1e-6));

  const MagnitudeImage zero = zero_filled_recon(ComplexGrid(8, 8));
  for (double v : zero.data()) CHECK(v == 0.0);
}
