// dualdomain: compressed-sensing MR reconstruction sandbox.
//
// Subcommands: generate-data, make-masks, train, evaluate, reconstruct.
// Exit codes: 0 success, 2 configuration error, 3 I/O or file-format error,
// 4 training divergence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dualdomain/checkpoint.hpp"
#include "dualdomain/dualdomain.hpp"

namespace fs = std::filesystem;
using namespace dualdomain;
using nlohmann::json;

namespace {

bool g_quiet = false;

void info(const std::string& line) {
  if (!g_quiet) std::cout << line << "\n";
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::io:
    case ErrorKind::format:
      return 3;
    case ErrorKind::divergence:
      return 4;
    default:
      return 2;
  }
}

// --- strict experiment config -------------------------------------------------

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!j.is_object())
    raise(ErrorKind::config, "config: " + where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      raise(ErrorKind::config,
            "config: unknown key '" + where + key + "'");
  }
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key))
    raise(ErrorKind::config, "config: missing key '" + where + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    raise(ErrorKind::config, "config: bad value for '" + where + key + "'");
  }
}

template <typename T>
T get_field_or(const json& j, const std::string& key, T fallback,
               const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    raise(ErrorKind::config, "config: bad value for '" + where + key + "'");
  }
}

struct DatasetConfig {
  int num_subjects = 10;
  int slices_per_subject = 16;
  int height = 64;
  int width = 64;
  std::array<int, 3> split_counts{6, 2, 2};
  PhantomSpec phantom;
};

struct MaskConfig {
  double acceleration = 4.0;
  double center_fraction = 0.08;
  uint64_t seed = 0;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  MaskConfig mask;
  UNetConfig freq_net = default_freq_net_config();
  UNetConfig image_net = default_image_net_config();
  UNetConfig baseline_net = default_baseline_config();
  bool baseline_net_given = false;
  TrainConfig train;
  bool train_baseline = false;
  std::string output_dir = "out";
};

UNetConfig parse_net(const json& j, const std::string& where, UNetConfig base) {
  require_keys(j, {"levels", "base_channels", "kernel_size", "residual"}, where);
  base.levels = get_field_or(j, "levels", base.levels, where);
  base.base_channels = get_field_or(j, "base_channels", base.base_channels, where);
  base.kernel_size = get_field_or(j, "kernel_size", base.kernel_size, where);
  base.residual = get_field_or(j, "residual", base.residual, where);
  base.validate();
  return base;
}

ExperimentConfig parse_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) raise(ErrorKind::io, "cannot open config: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    raise(ErrorKind::config, "config: malformed JSON: " + std::string(e.what()));
  }
  require_keys(j, {"dataset", "mask", "freq_net", "image_net", "baseline_net",
                   "train", "output_dir"}, "");

  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    require_keys(d, {"num_subjects", "slices_per_subject", "height", "width",
                     "split_counts", "phantom"}, "dataset.");
    cfg.dataset.num_subjects =
        get_field_or(d, "num_subjects", cfg.dataset.num_subjects, "dataset.");
    cfg.dataset.slices_per_subject = get_field_or(
        d, "slices_per_subject", cfg.dataset.slices_per_subject, "dataset.");
    cfg.dataset.height = get_field_or(d, "height", cfg.dataset.height, "dataset.");
    cfg.dataset.width = get_field_or(d, "width", cfg.dataset.width, "dataset.");
    if (d.contains("split_counts")) {
      const auto v = get_field<std::vector<int>>(d, "split_counts", "dataset.");
      if (v.size() != 3)
        raise(ErrorKind::config, "config: dataset.split_counts needs 3 entries");
      cfg.dataset.split_counts = {v[0], v[1], v[2]};
    }
    if (d.contains("phantom")) {
      const json& p = d["phantom"];
      require_keys(p, {"num_ellipses", "intensity_range", "phase_smoothness",
                       "noise_std", "seed"}, "dataset.phantom.");
      cfg.dataset.phantom.num_ellipses = get_field_or(
          p, "num_ellipses", cfg.dataset.phantom.num_ellipses, "dataset.phantom.");
      if (p.contains("intensity_range")) {
        const auto r = get_field<std::vector<double>>(p, "intensity_range",
                                                      "dataset.phantom.");
        if (r.size() != 2)
          raise(ErrorKind::config,
                "config: dataset.phantom.intensity_range needs 2 entries");
        cfg.dataset.phantom.intensity_lo = r[0];
        cfg.dataset.phantom.intensity_hi = r[1];
      }
      cfg.dataset.phantom.phase_smoothness =
          get_field_or(p, "phase_smoothness",
                       cfg.dataset.phantom.phase_smoothness, "dataset.phantom.");
      cfg.dataset.phantom.noise_std = get_field_or(
          p, "noise_std", cfg.dataset.phantom.noise_std, "dataset.phantom.");
      cfg.dataset.phantom.seed =
          get_field_or(p, "seed", cfg.dataset.phantom.seed, "dataset.phantom.");
    }
  }
  if (j.contains("mask")) {
    const json& m = j["mask"];
    require_keys(m, {"acceleration", "center_fraction", "seed"}, "mask.");
    cfg.mask.acceleration =
        get_field_or(m, "acceleration", cfg.mask.acceleration, "mask.");
    cfg.mask.center_fraction =
        get_field_or(m, "center_fraction", cfg.mask.center_fraction, "mask.");
    cfg.mask.seed = get_field_or(m, "seed", cfg.mask.seed, "mask.");
  }
  if (j.contains("freq_net")) {
    cfg.freq_net = parse_net(j["freq_net"], "freq_net.", cfg.freq_net);
    if (cfg.freq_net.in_channels != 2 || cfg.freq_net.out_channels != 2)
      raise(ErrorKind::config, "config: freq_net must stay 2->2 channels");
  }
  if (j.contains("image_net"))
    cfg.image_net = parse_net(j["image_net"], "image_net.", cfg.image_net);
  if (j.contains("baseline_net")) {
    cfg.baseline_net = parse_net(j["baseline_net"], "baseline_net.",
                                 cfg.baseline_net);
    cfg.baseline_net.residual = true; // the comparator is residual by definition
    cfg.baseline_net_given = true;
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    require_keys(t, {"w1", "w2", "learning_rate", "batch_size", "epochs",
                     "seed", "mask_mode", "train_baseline"}, "train.");
    cfg.train.w1 = get_field_or(t, "w1", cfg.train.w1, "train.");
    cfg.train.w2 = get_field_or(t, "w2", cfg.train.w2, "train.");
    cfg.train.learning_rate =
        get_field_or(t, "learning_rate", cfg.train.learning_rate, "train.");
    cfg.train.batch_size =
        get_field_or(t, "batch_size", cfg.train.batch_size, "train.");
    cfg.train.epochs = get_field_or(t, "epochs", cfg.train.epochs, "train.");
    cfg.train.seed = get_field_or(t, "seed", cfg.train.seed, "train.");
    if (t.contains("mask_mode"))
      cfg.train.mask_mode = mask_mode_from_string(
          get_field<std::string>(t, "mask_mode", "train."));
    cfg.train_baseline =
        get_field_or(t, "train_baseline", cfg.train_baseline, "train.");
  }
  cfg.output_dir = get_field_or(j, "output_dir", cfg.output_dir, "");
  cfg.train.acceleration = cfg.mask.acceleration;
  cfg.train.center_fraction = cfg.mask.center_fraction;
  return cfg;
}

// --- subcommands ----------------------------------------------------------------

int cmd_generate_data(const fs::path& config_path, const fs::path& out_override,
                      std::optional<uint64_t> seed_override) {
  ExperimentConfig cfg = parse_config(config_path);
  if (seed_override) cfg.dataset.phantom.seed = *seed_override;
  const fs::path out =
      out_override.empty() ? fs::path(cfg.output_dir) / "data" : out_override;
  const DatasetSplit split = build_dataset(
      cfg.dataset.num_subjects, cfg.dataset.slices_per_subject,
      cfg.dataset.height, cfg.dataset.width, cfg.dataset.phantom,
      cfg.dataset.split_counts, out);
  info("dataset: " + std::to_string(cfg.dataset.num_subjects) + " subjects x " +
       std::to_string(cfg.dataset.slices_per_subject) + " slices, " +
       std::to_string(cfg.dataset.height) + "x" +
       std::to_string(cfg.dataset.width));
  info("split: train " + std::to_string(split.train.size()) + " / val " +
       std::to_string(split.validation.size()) + " / test " +
       std::to_string(split.test.size()));
  info("wrote " + out.string());
  return 0;
}

int cmd_make_masks(int height, int width, const std::vector<double>& accels,
                   double center_fraction, const std::vector<uint64_t>& seeds,
                   const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    raise(ErrorKind::io, "cannot create " + out.string());
  for (double r : accels) {
    for (uint64_t seed : seeds) {
      const SamplingMask mask =
          make_gaussian_mask(height, width, r, center_fraction, seed);
      char name[96];
      std::snprintf(name, sizeof name, "mask_r%g_s%llu", r,
                    static_cast<unsigned long long>(seed));
      save_mask(mask, out / (std::string(name) + ".cks"));
      Grid<uint8_t> preview(height, width);
      for (size_t i = 0; i < preview.size(); ++i)
        preview.data()[i] = mask.pattern.data()[i] ? 255 : 0;
      write_png_gray8(out / (std::string(name) + ".png"), preview);
      char line[160];
      std::snprintf(line, sizeof line, "%s: sampled fraction %.4f (target %.4f)",
                    name, mask.sampled_fraction(), 1.0 / r);
      info(line);
    }
  }
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& data_dir,
              const fs::path& out_override, std::optional<uint64_t> seed_override,
              bool baseline_flag) {
  ExperimentConfig cfg = parse_config(config_path);
  if (seed_override) cfg.train.seed = *seed_override;
  const fs::path out =
      out_override.empty() ? fs::path(cfg.output_dir) : out_override;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    raise(ErrorKind::io, "cannot create " + out.string());
  if (!fs::exists(data_dir / "split.json"))
    raise(ErrorKind::config, "no dataset at " + data_dir.string() +
                                 " (missing split.json)");

  DataStore data(data_dir);
  const auto [h, w] = data.slice_shape();
  const SamplingMask mask = make_gaussian_mask(
      h, w, cfg.mask.acceleration, cfg.mask.center_fraction, cfg.mask.seed);
  const auto [kstats, istats] = compute_training_stats(data, mask);

  CheckpointMeta meta;
  meta.train = cfg.train;
  meta.mask_seed = cfg.mask.seed;
  meta.data_height = h;
  meta.data_width = w;

  {
    const uint64_t init_seed = derive_seed(cfg.train.seed, seed_stream::kInit);
    HybridModel<float> model(cfg.freq_net, cfg.image_net, kstats, istats,
                             init_seed);
    info("hybrid parameters: " + std::to_string(model.param_count()));
    const FitResult r =
        fit(model, data, cfg.train, mask, out / "training_log.csv");
    meta.model = "hybrid";
    meta.epoch = r.best_epoch;
    meta.validation_nrmse = r.best_val_nrmse;
    meta.init_seed = init_seed;
    const fs::path ckpt = out / "hybrid.cks";
    save_checkpoint(ckpt, model, meta);
    char line[200];
    std::snprintf(line, sizeof line,
                  "hybrid: best epoch %d, validation NRMSE %.5f", r.best_epoch,
                  r.best_val_nrmse);
    info(line);
    const Container c = read_container(ckpt);
    std::snprintf(line, sizeof line, "checkpoint %s crc32 0x%08X",
                  ckpt.string().c_str(),
                  crc32(c.payload.data(), c.payload.size()));
    info(line);
  }

  if (baseline_flag || cfg.train_baseline) {
    UNetConfig bcfg = cfg.baseline_net;
    if (!cfg.baseline_net_given) {
      bcfg = cfg.image_net;
      bcfg.residual = true;
    }
    const uint64_t init_seed =
        derive_seed(cfg.train.seed, seed_stream::kInit, 1);
    BaselineModel<float> model(bcfg, istats, init_seed);
    const FitResult r = fit_baseline(model, data, cfg.train, mask,
                                     out / "baseline_training_log.csv");
    meta.model = "baseline";
    meta.epoch = r.best_epoch;
    meta.validation_nrmse = r.best_val_nrmse;
    meta.init_seed = init_seed;
    save_checkpoint(out / "baseline.cks", model, meta);
    char line[200];
    std::snprintf(line, sizeof line,
                  "baseline: best epoch %d, validation NRMSE %.5f",
                  r.best_epoch, r.best_val_nrmse);
    info(line);
  }
  return 0;
}

int cmd_evaluate(const fs::path& ckpt_path, const fs::path& data_dir,
                 double acceleration, const fs::path& out,
                 const std::string& method, int panel_slice) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    raise(ErrorKind::io, "cannot create " + out.string());

  const std::string kind = checkpoint_model_kind(ckpt_path);
  CheckpointMeta meta;
  std::optional<HybridModel<float>> hybrid;
  std::optional<BaselineModel<float>> baseline;
  if (kind == "hybrid")
    hybrid = load_hybrid_checkpoint<float>(ckpt_path, meta);
  else if (kind == "baseline")
    baseline = load_baseline_checkpoint<float>(ckpt_path, meta);
  else
    raise(ErrorKind::config, ckpt_path.string() + ": unknown model kind");

  DataStore data(data_dir);
  data.set_phase("evaluate");
  const auto [h, w] = [&] {
    if (data.split().test.empty())
      raise(ErrorKind::config, "dataset has an empty test split");
    const Volume& v = data.volume(data.split().test.front());
    return std::pair<int, int>{v.height(), v.width()};
  }();
  if (h != meta.data_height || w != meta.data_width)
    raise(ErrorKind::config,
          "checkpoint/dataset mismatch: trained on " +
              std::to_string(meta.data_height) + "x" +
              std::to_string(meta.data_width) + ", dataset is " +
              std::to_string(h) + "x" + std::to_string(w));

  const double r = acceleration > 0.0 ? acceleration : meta.train.acceleration;
  const SamplingMask mask = make_gaussian_mask(
      h, w, r, meta.train.center_fraction, meta.mask_seed);

  std::vector<const Volume*> test_vols;
  for (const auto& id : data.split().test) test_vols.push_back(&data.volume(id));

  const std::string effective =
      method == "checkpoint" ? kind : method;
  ReconFn recon;
  if (effective == "hybrid") {
    if (!hybrid)
      raise(ErrorKind::config, "method 'hybrid' needs a hybrid checkpoint");
    recon = [&](const ComplexKSpace& ku, const ComplexKSpace&) {
      return hybrid->forward(ku).fhat;
    };
  } else if (effective == "baseline") {
    if (!baseline)
      raise(ErrorKind::config, "method 'baseline' needs a baseline checkpoint");
    recon = [&](const ComplexKSpace& ku, const ComplexKSpace&) {
      return baseline->forward(ku);
    };
  } else if (effective == "zero-filled") {
    recon = [](const ComplexKSpace& ku, const ComplexKSpace&) {
      return zero_filled_recon(ku);
    };
  } else if (effective == "reference") {
    recon = [](const ComplexKSpace&, const ComplexKSpace& full) {
      return magnitude(ifft2c(full));
    };
  } else {
    raise(ErrorKind::config, "unknown method: " + effective);
  }

  const EvalReport report = evaluate(effective, recon, test_vols, mask, r);
  write_report_csv(report, out / "report.csv");
  write_report_json(report, out / "report.json");
  write_slice_curve_csv(report, out / "nrmse_by_slice.csv");
  write_curve_png(out / "nrmse_by_slice.png", report.nrmse_by_slice_index);

  // side-by-side panel: zero-filled | method | reference
  const Volume* pv = test_vols.front();
  const int ps = panel_slice >= 0 &&
                         panel_slice < static_cast<int>(pv->slices.size())
                     ? panel_slice
                     : static_cast<int>(pv->slices.size()) / 2;
  const ComplexKSpace& full = pv->slices[ps];
  const MagnitudeImage zf = zero_filled_recon(apply_mask(full, mask));
  const MagnitudeImage mine = recon(apply_mask(full, mask), full);
  const MagnitudeImage ref = magnitude(ifft2c(full));
  const auto [lo, hi] = detail::min_max(ref);
  write_panel_png(out / "panel.png", {&zf, &mine, &ref}, lo, hi);

  char line[200];
  std::snprintf(line, sizeof line,
                "%s @ %gx: NRMSE %.4f%% +/- %.4f%%, SSIM %.4f, PSNR %.2f dB "
                "(per-slice means)",
                effective.c_str(), r, 100.0 * report.per_slice.at("nrmse").mean,
                100.0 * report.per_slice.at("nrmse").std,
                report.per_slice.at("ssim").mean,
                report.per_slice.at("psnr").mean);
  info(line);
  info("wrote " + (out / "report.csv").string() + ", report.json, "
       "nrmse_by_slice.{csv,png}, panel.png");
  return 0;
}

int cmd_reconstruct(const fs::path& ckpt_path, const fs::path& input,
                    const fs::path& output) {
  const std::string kind = checkpoint_model_kind(ckpt_path);
  CheckpointMeta meta;
  std::optional<HybridModel<float>> hybrid;
  std::optional<BaselineModel<float>> baseline;
  if (kind == "hybrid")
    hybrid = load_hybrid_checkpoint<float>(ckpt_path, meta);
  else if (kind == "baseline")
    baseline = load_baseline_checkpoint<float>(ckpt_path, meta);
  else
    raise(ErrorKind::config, ckpt_path.string() + ": unknown model kind");

  const Volume vol = load_volume(input);
  if (vol.height() != meta.data_height || vol.width() != meta.data_width)
    raise(ErrorKind::config, "checkpoint/volume mismatch: trained on " +
                                 std::to_string(meta.data_height) + "x" +
                                 std::to_string(meta.data_width));

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<RealGrid> out_slices;
  out_slices.reserve(vol.slices.size());
  for (const auto& slice : vol.slices) {
    if (hybrid)
      out_slices.push_back(hybrid->forward(slice).fhat);
    else
      out_slices.push_back(baseline->forward(slice));
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  save_image_volume(out_slices, vol.subject_id, output);
  char line[160];
  std::snprintf(line, sizeof line, "reconstructed %zu slices in %.3f s",
                vol.slices.size(), wall);
  info(line);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualdomain: hybrid k-space/image-domain CS MR reconstruction"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--quiet", g_quiet, "suppress informational output");

  std::string config_path, data_dir, out_dir, ckpt_path, input_path, method =
      "checkpoint";
  int64_t seed = -1;
  int height = 256, width = 256, panel_slice = -1;
  double acceleration = -1.0, center_fraction = 0.08;
  std::vector<double> accels{4.0};
  std::vector<uint64_t> seeds{0};
  bool baseline_flag = false;

  auto* gen = app.add_subcommand("generate-data",
                                 "synthesize a raw k-space phantom dataset");
  gen->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  gen->add_option("--out", out_dir, "output directory (default: config output_dir/data)");
  gen->add_option("--seed", seed, "override the phantom seed");

  auto* masks = app.add_subcommand("make-masks",
                                   "generate Gaussian undersampling masks");
  masks->add_option("--height", height, "mask height")->required();
  masks->add_option("--width", width, "mask width")->required();
  masks->add_option("--acceleration", accels,
                    "acceleration factors (repeatable)");
  masks->add_option("--center-fraction", center_fraction,
                    "fully sampled center fraction per axis");
  masks->add_option("--seed", seeds, "mask seeds (repeatable)");
  masks->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the hybrid model");
  train->add_option("--config", config_path, "experiment config (JSON)")
      ->required();
  train->add_option("--data", data_dir, "dataset directory")->required();
  train->add_option("--out", out_dir, "output directory (default: config output_dir)");
  train->add_option("--seed", seed, "override the training seed");
  train->add_flag("--baseline", baseline_flag,
                  "also train the image-domain baseline U-net");

  auto* eval = app.add_subcommand("evaluate",
                                  "score a checkpoint on the test split");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();
  eval->add_option("--acceleration", acceleration,
                   "evaluation acceleration (default: training value)");
  eval->add_option("--out", out_dir, "report directory")->required();
  eval->add_option("--method", method,
                   "checkpoint|hybrid|baseline|zero-filled|reference");
  eval->add_option("--panel-slice", panel_slice,
                   "slice index for the side-by-side panel");

  auto* rec = app.add_subcommand("reconstruct",
                                 "reconstruct one (undersampled) volume");
  rec->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  rec->add_option("--input", input_path, "input k-space volume (.cks)")
      ->required();
  rec->add_option("--out", out_dir, "output image volume (.cks)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e); // 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::optional<uint64_t> seed_override =
      seed >= 0 ? std::optional<uint64_t>(static_cast<uint64_t>(seed))
                : std::nullopt;

  try {
    if (gen->parsed())
      return cmd_generate_data(config_path, out_dir, seed_override);
    if (masks->parsed())
      return cmd_make_masks(height, width, accels, center_fraction, seeds,
                            out_dir);
    if (train->parsed())
      return cmd_train(config_path, data_dir, out_dir, seed_override,
                       baseline_flag);
    if (eval->parsed())
      return cmd_evaluate(ckpt_path, data_dir, acceleration, out_dir, method,
                          panel_slice);
    if (rec->parsed())
      return cmd_reconstruct(ckpt_path, input_path, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
