#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualdomain/container.hpp"
#include "dualdomain/kspace.hpp"
#include "dualdomain/phantom.hpp"

namespace dualdomain {

/// Fully sampled ground-truth k-space for one subject.
struct Volume {
  std::string subject_id;
  uint64_t seed = 0;
  std::vector<ComplexKSpace> slices;

  int height() const { return slices.empty() ? 0 : slices.front().height(); }
  int width() const { return slices.empty() ? 0 : slices.front().width(); }
};

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

/// Largest |K(k) - conj(K(-k))| relative to max |K|. Real-valued images give
/// ~0; the complex phase of the phantoms keeps this well above tolerance.
inline double hermitian_violation(const ComplexKSpace& k) {
  // mirror in unshifted coordinates: index j -> (N - j) mod N
  const ComplexGrid u = detail::ifftshift(k);
  const int h = u.height(), w = u.width();
  double max_diff = 0.0, max_abs = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto v = u.at(y, x);
      const auto m = std::conj(u.at((h - y) % h, (w - x) % w));
      max_diff = std::max(max_diff, std::abs(v - m));
      max_abs = std::max(max_abs, std::abs(v));
    }
  return max_abs > 0.0 ? max_diff / max_abs : 0.0;
}

constexpr double kHermitianTolerance = 1e-3;

inline void validate_volume(const Volume& v) {
  if (v.slices.empty())
    raise(ErrorKind::invalid_input, "volume has no slices");
  for (const auto& s : v.slices) {
    if (s.height() != v.height() || s.width() != v.width())
      raise(ErrorKind::invalid_input, "volume slices disagree on shape");
    require_finite(s, "volume slice");
    if (hermitian_violation(s) <= kHermitianTolerance)
      raise(ErrorKind::invalid_input,
            "volume slice is Hermitian-symmetric; not valid raw k-space");
  }
}

namespace detail {

/// Signal taper along the slice axis; edge slices carry little signal, like
/// the ends of an anatomical volume.
inline double slice_taper(int slice, int num_slices) {
  const double t = (slice + 0.5) / num_slices;
  return 0.30 + 0.70 * std::sin(std::numbers::pi * t);
}

} // namespace detail

/// One subject: a shared ellipse layout swept through the slice axis with a
/// smooth intensity/size taper and a slowly drifting phase field.
inline Volume gen_subject_volume(const std::string& subject_id, int num_slices,
                                 int height, int width,
                                 const PhantomSpec& spec) {
  spec.validate();
  if (num_slices < 1)
    raise(ErrorKind::config, "gen_subject_volume: num_slices must be >= 1");
  if (height < 16 || width < 16)
    raise(ErrorKind::config, "gen_subject_volume: dimensions must be >= 16");

  Rng rng(spec.seed);
  const auto ellipses = detail::sample_ellipses(
      rng, spec.num_ellipses, height, width, spec.intensity_lo,
      spec.intensity_hi);
  const auto phase = detail::PhaseField::sample(rng, spec.phase_smoothness);
  double drift[detail::PhaseField::kWaves];
  for (double& d : drift) d = rng.uniform(-0.25, 0.25);

  Volume vol;
  vol.subject_id = subject_id;
  vol.seed = spec.seed;
  vol.slices.reserve(static_cast<size_t>(num_slices));
  for (int z = 0; z < num_slices; ++z) {
    const double taper = detail::slice_taper(z, num_slices);
    const RealGrid mag = detail::rasterize_ellipses(
        ellipses, height, width, 0.75 + 0.25 * taper, taper);
    // drift the phase field smoothly across slices
    detail::PhaseField slice_phase = phase;
    for (int i = 0; i < detail::PhaseField::kWaves; ++i)
      slice_phase.psi[i] += drift[i] * z;
    ComplexGrid img(height, width);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        img.at(y, x) = std::polar(mag.at(y, x), slice_phase.eval(y, x));
    vol.slices.push_back(
        simulate_kspace(img, spec.noise_std, derive_seed(spec.seed, 1000 + z)));
  }
  validate_volume(vol);
  return vol;
}

// container I/O --------------------------------------------------------------

constexpr int kVolumeFormatVersion = 1;

inline void save_volume(const Volume& v, const std::filesystem::path& path) {
  if (v.slices.empty())
    raise(ErrorKind::invalid_input, "save_volume: empty volume");
  nlohmann::json header{
      {"kind", "volume"},
      {"version", kVolumeFormatVersion},
      {"dtype", "complex64 as interleaved float32 little-endian"},
      {"shape", {v.slices.size(), v.height(), v.width()}},
      {"acquisition_shape", {v.height(), v.width()}},
      {"subject_id", v.subject_id},
      {"seed", v.seed},
  };
  std::vector<uint8_t> payload;
  payload.reserve(v.slices.size() * v.slices.front().size() * 8);
  for (const auto& s : v.slices)
    for (const auto& c : s.data()) {
      append_f32(payload, static_cast<float>(c.real()));
      append_f32(payload, static_cast<float>(c.imag()));
    }
  write_container(path, header, payload);
}

inline Volume load_volume(const std::filesystem::path& path) {
  const Container c = read_container(path);
  const std::string origin = path.string();
  if (!c.header.contains("kind") || c.header["kind"] != "volume")
    raise(ErrorKind::format, origin + ": not a volume container");
  if (c.header.value("version", -1) != kVolumeFormatVersion)
    raise(ErrorKind::format, origin + ": unsupported volume format version");
  const auto shape = c.header.at("shape");
  if (!shape.is_array() || shape.size() != 3)
    raise(ErrorKind::format, origin + ": malformed shape");
  const size_t ns = shape[0].get<size_t>();
  const int h = shape[1].get<int>(), w = shape[2].get<int>();
  if (ns == 0 || h <= 0 || w <= 0)
    raise(ErrorKind::format, origin + ": degenerate shape");
  const size_t expect = ns * static_cast<size_t>(h) * w * 8;
  if (c.payload.size() != expect)
    raise(ErrorKind::format,
          origin + ": header shape disagrees with payload length (" +
              std::to_string(c.payload.size()) + " bytes, expected " +
              std::to_string(expect) + ")");
  Volume v;
  v.subject_id = c.header.value("subject_id", std::string{});
  v.seed = c.header.value("seed", uint64_t{0});
  v.slices.reserve(ns);
  const uint8_t* p = c.payload.data();
  for (size_t s = 0; s < ns; ++s) {
    ComplexKSpace g(h, w);
    for (auto& cpx : g.data()) {
      const float re = read_f32(p);
      const float im = read_f32(p + 4);
      p += 8;
      cpx = std::complex<double>(re, im);
    }
    v.slices.push_back(std::move(g));
  }
  validate_volume(v);
  return v;
}

// split manifest --------------------------------------------------------------

inline void check_disjoint(const DatasetSplit& split) {
  std::set<std::string> seen;
  auto add = [&](const std::vector<std::string>& ids, const char* name) {
    for (const auto& id : ids)
      if (!seen.insert(id).second)
        raise(ErrorKind::config,
              std::string("dataset split: subject '") + id +
                  "' appears in more than one split (" + name + ")");
  };
  add(split.train, "train");
  add(split.validation, "validation");
  add(split.test, "test");
}

inline void save_split(const DatasetSplit& split,
                       const std::filesystem::path& path) {
  check_disjoint(split);
  nlohmann::json j{{"train", split.train},
                   {"validation", split.validation},
                   {"test", split.test}};
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorKind::io, "cannot write split manifest: " + path.string());
  f << j.dump(2) << "\n";
}

inline DatasetSplit load_split(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::io, "cannot open split manifest: " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::format,
          path.string() + ": malformed split manifest: " + e.what());
  }
  DatasetSplit s;
  try {
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::format,
          path.string() + ": malformed split manifest: " + e.what());
  }
  check_disjoint(s);
  return s;
}

inline std::filesystem::path volume_path(const std::filesystem::path& dir,
                                         const std::string& subject_id) {
  return dir / (subject_id + ".cks");
}

/// Generates `num_subjects` subject volumes, writes them plus a split
/// manifest under out_dir, and returns the (disjoint) split.
inline DatasetSplit build_dataset(int num_subjects, int slices_per_subject,
                                  int height, int width,
                                  const PhantomSpec& spec_template,
                                  std::array<int, 3> split_counts,
                                  const std::filesystem::path& out_dir) {
  spec_template.validate();
  if (num_subjects < 1)
    raise(ErrorKind::config, "build_dataset: num_subjects must be >= 1");
  if (split_counts[0] < 0 || split_counts[1] < 0 || split_counts[2] < 0 ||
      split_counts[0] + split_counts[1] + split_counts[2] != num_subjects)
    raise(ErrorKind::config,
          "build_dataset: split counts must be non-negative and sum to "
          "num_subjects");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir))
    raise(ErrorKind::io, "build_dataset: cannot create " + out_dir.string());

  DatasetSplit split;
  for (int i = 0; i < num_subjects; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "subj%03d", i);
    const std::string id = buf;
    PhantomSpec spec = spec_template;
    spec.seed = derive_seed(spec_template.seed, static_cast<uint64_t>(i));
    const Volume vol =
        gen_subject_volume(id, slices_per_subject, height, width, spec);
    save_volume(vol, volume_path(out_dir, id));
    if (i < split_counts[0])
      split.train.push_back(id);
    else if (i < split_counts[0] + split_counts[1])
      split.validation.push_back(id);
    else
      split.test.push_back(id);
  }
  save_split(split, out_dir / "split.json");
  return split;
}

// reconstructed magnitude volumes ----------------------------------------------

inline void save_image_volume(const std::vector<RealGrid>& slices,
                              const std::string& subject_id,
                              const std::filesystem::path& path) {
  if (slices.empty())
    raise(ErrorKind::invalid_input, "save_image_volume: empty volume");
  const int h = slices.front().height(), w = slices.front().width();
  nlohmann::json header{
      {"kind", "image_volume"},
      {"version", kVolumeFormatVersion},
      {"dtype", "float32 little-endian"},
      {"shape", {slices.size(), h, w}},
      {"subject_id", subject_id},
  };
  std::vector<uint8_t> payload;
  payload.reserve(slices.size() * slices.front().size() * 4);
  for (const auto& s : slices) {
    if (s.height() != h || s.width() != w)
      raise(ErrorKind::invalid_input, "save_image_volume: slice shape mismatch");
    for (double v : s.data()) append_f32(payload, static_cast<float>(v));
  }
  write_container(path, header, payload);
}

inline std::vector<RealGrid>
load_image_volume(const std::filesystem::path& path, std::string* subject_id = nullptr) {
  const Container c = read_container(path);
  const std::string origin = path.string();
  if (!c.header.contains("kind") || c.header["kind"] != "image_volume")
    raise(ErrorKind::format, origin + ": not an image_volume container");
  const auto shape = c.header.at("shape");
  const size_t ns = shape.at(0).get<size_t>();
  const int h = shape.at(1).get<int>(), w = shape.at(2).get<int>();
  if (c.payload.size() != ns * static_cast<size_t>(h) * w * 4)
    raise(ErrorKind::format, origin + ": payload length mismatch");
  if (subject_id) *subject_id = c.header.value("subject_id", std::string{});
  std::vector<RealGrid> out;
  out.reserve(ns);
  const uint8_t* p = c.payload.data();
  for (size_t s = 0; s < ns; ++s) {
    RealGrid g(h, w);
    for (auto& v : g.data()) {
      v = static_cast<double>(read_f32(p));
      p += 4;
    }
    out.push_back(std::move(g));
  }
  return out;
}

// masks share the container ----------------------------------------------------

inline void save_mask(const SamplingMask& mask,
                      const std::filesystem::path& path) {
  nlohmann::json header{
      {"kind", "mask"},
      {"version", kVolumeFormatVersion},
      {"dtype", "uint8"},
      {"shape", {mask.height(), mask.width()}},
      {"acceleration", mask.target_acceleration},
      {"center_fraction", mask.center_fraction},
      {"seed", mask.seed},
  };
  std::vector<uint8_t> payload(mask.pattern.data().begin(),
                               mask.pattern.data().end());
  write_container(path, header, payload);
}

inline SamplingMask load_mask(const std::filesystem::path& path) {
  const Container c = read_container(path);
  const std::string origin = path.string();
  if (!c.header.contains("kind") || c.header["kind"] != "mask")
    raise(ErrorKind::format, origin + ": not a mask container");
  const auto shape = c.header.at("shape");
  const int h = shape.at(0).get<int>(), w = shape.at(1).get<int>();
  if (c.payload.size() != static_cast<size_t>(h) * w)
    raise(ErrorKind::format, origin + ": payload length mismatch");
  SamplingMask m;
  m.pattern = MaskGrid(h, w);
  for (size_t i = 0; i < c.payload.size(); ++i) {
    if (c.payload[i] > 1)
      raise(ErrorKind::format, origin + ": mask values must be 0 or 1");
    m.pattern.data()[i] = c.payload[i];
  }
  m.target_acceleration = c.header.value("acceleration", 0.0);
  m.center_fraction = c.header.value("center_fraction", 0.0);
  m.seed = c.header.value("seed", uint64_t{0});
  return m;
}

} // namespace dualdomain
