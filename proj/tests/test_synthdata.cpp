#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>

#include "dualdomain/dataset.hpp"

using namespace dualdomain;
namespace fs = std::filesystem;

namespace {
fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<uint8_t> slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

PhantomSpec test_spec(uint64_t seed = 5) {
  PhantomSpec s;
  s.num_ellipses = 4;
  s.intensity_lo = 0.4;
  s.intensity_hi = 1.0;
  s.phase_smoothness = 16.0;
  s.noise_std = 0.01;
  s.seed = seed;
  return s;
}
} // namespace

TEST_CASE("phantom image is deterministic and bounded", "[synthdata]") {
  const auto a = gen_phantom_image(64, 64, test_spec());
  const auto b = gen_phantom_image(64, 64, test_spec());
  CHECK(a == b);
  const auto c = gen_phantom_image(64, 64, test_spec(6));
  CHECK_FALSE(a == c);
  for (const auto& v : a.data()) CHECK(std::abs(v) < 16.0);
}

TEST_CASE("nearly constant phase leaves a plain ellipse image", "[synthdata]") {
  PhantomSpec s = test_spec();
  s.num_ellipses = 1;
  s.phase_smoothness = 1e9; // wavevectors collapse to zero: constant phase
  const auto img = gen_phantom_image(64, 64, s);
  // constant phase: the ratio im/re is the same wherever there is signal
  double phase = 0.0;
  bool found = false;
  double max_mag = 0.0;
  for (const auto& v : img.data()) max_mag = std::max(max_mag, std::abs(v));
  CHECK(max_mag > 0.1);
  for (const auto& v : img.data()) {
    if (std::abs(v) > 0.5 * max_mag) {
      if (!found) {
        phase = std::arg(v);
        found = true;
      } else {
        CHECK(std::arg(v) == Approx(phase).margin(1e-6));
      }
    }
  }
}

TEST_CASE("small dims are a configuration error", "[synthdata]") {
  CHECK_THROWS_AS(gen_phantom_image(8, 64, test_spec()), Error);
  PhantomSpec bad = test_spec();
  bad.num_ellipses = 0;
  CHECK_THROWS_AS(gen_phantom_image(64, 64, bad), Error);
}

TEST_CASE("phantom k-space violates Hermitian symmetry", "[synthdata]") {
  PhantomSpec s = test_spec();
  s.phase_smoothness = 32.0;
  const auto img = gen_phantom_image(64, 64, s);
  const auto k = fft2c(img);
  CHECK(hermitian_violation(k) > kHermitianTolerance);

  // control: a real-valued image is Hermitian
  ComplexGrid real_img(64, 64);
  for (size_t i = 0; i < img.size(); ++i)
    real_img.data()[i] = std::abs(img.data()[i]);
  CHECK(hermitian_violation(fft2c(real_img)) < 1e-10);
}

TEST_CASE("simulate_kspace reduces to fft2c at zero noise", "[synthdata]") {
  const auto img = gen_phantom_image(32, 32, test_spec());
  const auto k0 = simulate_kspace(img, 0.0, 99);
  const auto ref = fft2c(img);
  for (size_t i = 0; i < k0.size(); ++i) {
    // float32 quantization is the only difference
    CHECK(k0.data()[i].real() ==
          static_cast<double>(static_cast<float>(ref.data()[i].real())));
    CHECK(k0.data()[i].imag() ==
          static_cast<double>(static_cast<float>(ref.data()[i].imag())));
  }
}

TEST_CASE("k-space noise power matches 2*sigma^2", "[synthdata]") {
  ComplexGrid img(256, 256, std::complex<double>(0.0, 0.0));
  const double sigma = 0.05;
  const auto k = simulate_kspace(img, sigma, 1234);
  double power = 0.0;
  for (const auto& v : k.data()) power += std::norm(v);
  power /= static_cast<double>(k.size());
  CHECK(power == Approx(2.0 * sigma * sigma).epsilon(0.10));
}

TEST_CASE("noise seeds vary the noise but not the clean part", "[synthdata]") {
  const auto img = gen_phantom_image(32, 32, test_spec());
  const auto a = simulate_kspace(img, 0.05, 1);
  const auto b = simulate_kspace(img, 0.05, 2);
  CHECK_FALSE(a == b);
  // denoised difference has zero mean structure: a - b is pure noise
  const auto clean = simulate_kspace(img, 0.0, 3);
  double da = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    da = std::max(da, std::abs(a.data()[i] - clean.data()[i]));
  CHECK(da < 0.05 * 8.0); // a few sigma
}

TEST_CASE("subject volumes share layout with edge taper", "[synthdata]") {
  const Volume v = gen_subject_volume("subjX", 12, 64, 64, test_spec());
  CHECK(v.slices.size() == 12);
  // energy profile should peak centrally and fall off at the edges
  std::vector<double> energy;
  for (const auto& s : v.slices) {
    double e = 0.0;
    for (const auto& c : s.data()) e += std::norm(c);
    energy.push_back(e);
  }
  CHECK(energy.front() < energy[6]);
  CHECK(energy.back() < energy[6]);
}

TEST_CASE("volume save/load round trips bit-exactly", "[synthdata]") {
  const fs::path dir = fresh_dir("dd_volume_roundtrip");
  const Volume v = gen_subject_volume("subjR", 4, 32, 32, test_spec(11));
  save_volume(v, dir / "v.cks");
  const Volume w = load_volume(dir / "v.cks");
  CHECK(w.subject_id == v.subject_id);
  REQUIRE(w.slices.size() == v.slices.size());
  for (size_t s = 0; s < v.slices.size(); ++s)
    CHECK(w.slices[s] == v.slices[s]); // exact double equality
}

TEST_CASE("volume header/payload mismatch is a format error", "[synthdata]") {
  const fs::path dir = fresh_dir("dd_volume_badshape");
  const Volume v = gen_subject_volume("subjB", 2, 32, 32, test_spec(12));
  save_volume(v, dir / "v.cks");

  // rewrite with a lying header
  Container c = read_container(dir / "v.cks");
  c.header["shape"] = {3, 32, 32};
  write_container(dir / "v.cks", c.header, c.payload);
  CHECK_THROWS_MATCHES(load_volume(dir / "v.cks"), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.kind() == ErrorKind::format;
                       }));
}

TEST_CASE("build_dataset writes volumes and a disjoint split", "[synthdata]") {
  const fs::path dir = fresh_dir("dd_dataset_build");
  const DatasetSplit split =
      build_dataset(6, 4, 32, 32, test_spec(21), {3, 2, 1}, dir);
  CHECK(split.train.size() == 3);
  CHECK(split.validation.size() == 2);
  CHECK(split.test.size() == 1);
  check_disjoint(split); // throws on overlap
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".cks") ++files;
  CHECK(files == 6);
  const DatasetSplit reloaded = load_split(dir / "split.json");
  CHECK(reloaded.train == split.train);
  CHECK(reloaded.test == split.test);

  SECTION("every stored slice is non-Hermitian") {
    for (const auto& id : split.train) {
      const Volume v = load_volume(volume_path(dir, id));
      for (const auto& s : v.slices)
        CHECK(hermitian_violation(s) > kHermitianTolerance);
    }
  }
}

TEST_CASE("bad split counts are a configuration error", "[synthdata]") {
  const fs::path dir = fresh_dir("dd_dataset_badsplit");
  CHECK_THROWS_AS(build_dataset(10, 4, 32, 32, test_spec(), {5, 5, 5}, dir),
                  Error);
}

TEST_CASE("dataset builds are byte identical across runs", "[synthdata]") {
  const fs::path d1 = fresh_dir("dd_dataset_det1");
  const fs::path d2 = fresh_dir("dd_dataset_det2");
  build_dataset(3, 4, 32, 32, test_spec(33), {1, 1, 1}, d1);
  build_dataset(3, 4, 32, 32, test_spec(33), {1, 1, 1}, d2);
  for (const auto& e : fs::directory_iterator(d1)) {
    const auto other = d2 / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(slurp(e.path()) == slurp(other));
  }
}

TEST_CASE("overlapping split manifests are rejected on load", "[synthdata]") {
  const fs::path dir = fresh_dir("dd_split_overlap");
  std::ofstream f(dir / "split.json");
  f << R"({"train": ["a", "b"], "validation": ["b"], "test": ["c"]})";
  f.close();
  CHECK_THROWS_AS(load_split(dir / "split.json"), Error);
}

TEST_CASE("mask containers round trip", "[synthdata]") {
  const fs::path dir = fresh_dir("dd_mask_roundtrip");
  const SamplingMask m = make_gaussian_mask(64, 48, 4.0, 0.08, 77);
  save_mask(m, dir / "m.cks");
  const SamplingMask r = load_mask(dir / "m.cks");
  CHECK(r.pattern == m.pattern);
  CHECK(r.target_acceleration == m.target_acceleration);
  CHECK(r.center_fraction == m.center_fraction);
  CHECK(r.seed == m.seed);
}
