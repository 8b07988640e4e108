#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dualdomain/dataset.hpp"
#include "dualdomain/hybrid.hpp"
#include "dualdomain/loss.hpp"
#include "dualdomain/metrics.hpp"
#include "dualdomain/nn/adam.hpp"

namespace dualdomain {

enum class MaskMode { fixed, per_epoch };

inline std::string to_string(MaskMode m) {
  return m == MaskMode::fixed ? "fixed" : "per-epoch";
}

inline MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "fixed") return MaskMode::fixed;
  if (s == "per-epoch") return MaskMode::per_epoch;
  raise(ErrorKind::config, "unknown mask_mode: " + s);
}

struct TrainConfig {
  double w1 = 0.001;
  double w2 = 0.999;
  double learning_rate = 1e-3;
  int batch_size = 4;
  int epochs = 1;
  uint64_t seed = 0;
  double acceleration = 4.0;
  double center_fraction = 0.08;
  MaskMode mask_mode = MaskMode::fixed;

  void validate() const {
    if (w1 < 0.0 || w2 < 0.0 || !(w1 + w2 > 0.0))
      raise(ErrorKind::config, "TrainConfig: need w1, w2 >= 0 and w1 + w2 > 0");
    if (!(learning_rate > 0.0))
      raise(ErrorKind::config, "TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) raise(ErrorKind::config, "TrainConfig: batch_size >= 1");
    if (epochs < 1) raise(ErrorKind::config, "TrainConfig: epochs >= 1");
    if (!(acceleration > 1.0))
      raise(ErrorKind::config, "TrainConfig: acceleration must be > 1");
  }
};

// seed streams
namespace seed_stream {
constexpr uint64_t kMask = 101;
constexpr uint64_t kInit = 202;
constexpr uint64_t kShuffle = 303;
} // namespace seed_stream

/// Read access to a dataset directory (volumes + split manifest) with an
/// access hook, so tests can assert that statistics and training never touch
/// held-out subjects.
class DataStore {
public:
  explicit DataStore(const std::filesystem::path& dir)
      : dir_(dir), split_(load_split(dir / "split.json")) {}

  const DatasetSplit& split() const { return split_; }
  const std::filesystem::path& dir() const { return dir_; }

  void set_access_hook(
      std::function<void(const std::string&, const std::string&)> hook) {
    hook_ = std::move(hook);
  }
  void set_phase(std::string phase) { phase_ = std::move(phase); }

  const Volume& volume(const std::string& subject_id) {
    if (hook_) hook_(subject_id, phase_);
    auto it = cache_.find(subject_id);
    if (it == cache_.end()) {
      it = cache_.emplace(subject_id, load_volume(volume_path(dir_, subject_id)))
               .first;
    }
    return it->second;
  }

  /// Shape probed from the first training subject.
  std::pair<int, int> slice_shape() {
    if (split_.train.empty())
      raise(ErrorKind::config, "dataset has an empty training split");
    const Volume& v = volume(split_.train.front());
    return {v.height(), v.width()};
  }

private:
  std::filesystem::path dir_;
  DatasetSplit split_;
  std::map<std::string, Volume> cache_;
  std::function<void(const std::string&, const std::string&)> hook_;
  std::string phase_ = "unspecified";
};

/// Normalization statistics from the training split only: k-space stats over
/// the undersampled slices (real+imag jointly), image stats over their
/// zero-filled reconstructions.
inline std::pair<NormStats, NormStats>
compute_training_stats(DataStore& data, const SamplingMask& mask) {
  data.set_phase("stats");
  if (data.split().train.empty())
    raise(ErrorKind::statistics, "compute_training_stats: empty training split");
  detail::StatsAccumulator kacc, iacc;
  std::vector<ComplexGrid> undersampled;
  std::vector<RealGrid> recons;
  for (const auto& id : data.split().train) {
    const Volume& vol = data.volume(id);
    for (const auto& slice : vol.slices) {
      ComplexGrid ku = apply_mask(slice, mask);
      RealGrid zf = zero_filled_recon(ku);
      kacc.add_grid(ku);
      iacc.add_grid(zf);
      undersampled.push_back(std::move(ku));
      recons.push_back(std::move(zf));
    }
  }
  const double kmean = kacc.mean(), imean = iacc.mean();
  for (const auto& g : undersampled) kacc.add_grid_sq(g, kmean);
  for (const auto& g : recons) iacc.add_grid_sq(g, imean);
  NormStats kstats{kmean, kacc.pop_std()};
  NormStats istats{imean, iacc.pop_std()};
  if (!(kstats.std > 0.0) || !(istats.std > 0.0))
    raise(ErrorKind::statistics, "compute_training_stats: zero variance");
  return {kstats, istats};
}

struct EpochLog {
  int epoch;
  double train_loss;
  double val_nrmse;
  double wall_seconds;
};

struct FitResult {
  int best_epoch = -1;
  double best_val_nrmse = 0.0;
  std::vector<EpochLog> log;
};

struct SliceRef {
  std::string subject_id;
  int slice_index;
};

namespace detail {

inline std::vector<SliceRef> list_slices(DataStore& data,
                                         const std::vector<std::string>& ids) {
  std::vector<SliceRef> out;
  for (const auto& id : ids) {
    const Volume& v = data.volume(id);
    for (int s = 0; s < static_cast<int>(v.slices.size()); ++s)
      out.push_back({id, s});
  }
  return out;
}

template <typename T>
std::vector<std::vector<T>> snapshot_params(std::vector<nn::ParamRef<T>>& refs) {
  std::vector<std::vector<T>> out;
  out.reserve(refs.size());
  for (auto& r : refs) out.push_back(*r.value);
  return out;
}

template <typename T>
void restore_params(std::vector<nn::ParamRef<T>>& refs,
                    const std::vector<std::vector<T>>& snap) {
  for (size_t i = 0; i < refs.size(); ++i) *refs[i].value = snap[i];
}

inline void write_log_csv(const std::filesystem::path& path,
                          const std::vector<EpochLog>& log) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorKind::io, "cannot write training log: " + path.string());
  f << "epoch,train_loss,val_nrmse,wall_seconds\n";
  char buf[160];
  for (const auto& row : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.3f\n", row.epoch,
                  row.train_loss, row.val_nrmse, row.wall_seconds);
    f << buf;
  }
}

} // namespace detail

/// Mini-batch Adam training of the hybrid model with per-epoch validation;
/// restores and reports the parameters with the lowest validation NRMSE.
/// Fully deterministic given the seed. Aborts on a non-finite loss.
template <typename T>
FitResult fit(HybridModel<T>& model, DataStore& data, const TrainConfig& cfg,
              const SamplingMask& mask,
              const std::filesystem::path& log_csv = {}) {
  cfg.validate();
  if (data.split().train.empty() || data.split().validation.empty())
    raise(ErrorKind::config, "fit: training and validation splits must be non-empty");

  std::vector<nn::ParamRef<T>> params;
  model.collect_params(params);
  nn::Adam<T> adam(params, cfg.learning_rate);

  data.set_phase("train");
  std::vector<SliceRef> train_slices = detail::list_slices(data, data.split().train);
  data.set_phase("validate");
  std::vector<SliceRef> val_slices =
      detail::list_slices(data, data.split().validation);

  FitResult result;
  std::vector<std::vector<T>> best_params;
  const auto t0 = std::chrono::steady_clock::now();

  SamplingMask redrawn_mask;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const SamplingMask* epoch_mask = &mask;
    if (cfg.mask_mode == MaskMode::per_epoch) {
      redrawn_mask = make_gaussian_mask(
          mask.height(), mask.width(), cfg.acceleration, cfg.center_fraction,
          derive_seed(cfg.seed, seed_stream::kMask, static_cast<uint64_t>(epoch)));
      epoch_mask = &redrawn_mask;
    }

    data.set_phase("train");
    std::vector<size_t> order(train_slices.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, seed_stream::kShuffle,
                                static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int num_batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const double inv_n = 1.0 / static_cast<double>(end - start);
      model.zero_grad();
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const SliceRef& ref = train_slices[order[i]];
        const ComplexKSpace& full = data.volume(ref.subject_id).slices[ref.slice_index];
        const ComplexKSpace ku = apply_mask(full, *epoch_mask);
        const Tensor<T> f_norm =
            nn::complex_to_tensor<T>(normalize(full, model.kspace_stats()));
        const MagnitudeImage f_ref = magnitude(ifft2c(full));

        const auto diverged = [&](const std::string& why) {
          raise(ErrorKind::divergence,
                "fit: " + why + " at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(num_batches) + " (subject " +
                    ref.subject_id + ", slice " +
                    std::to_string(ref.slice_index) + ")");
        };
        typename HybridModel<T>::Cache cache;
        try {
          const auto out = model.forward(ku, cache);
          nn::Tensor<T> g_k;
          RealGrid g_img;
          const DualLossValue lv = dual_domain_loss_grad(
              out.fhat_norm_kspace, f_norm, out.fhat, f_ref, cfg.w1, cfg.w2,
              inv_n, g_k, g_img);
          if (!std::isfinite(lv.total)) diverged("non-finite loss");
          batch_loss += lv.total * inv_n;
          model.backward(g_img, g_k, cache);
        } catch (const Error& e) {
          // non-finite activations surface as invalid-input from the bridge
          if (e.kind() == ErrorKind::invalid_input)
            diverged(std::string("non-finite forward pass (") + e.what() + ")");
          throw;
        }
      }
      adam.step();
      epoch_loss += batch_loss;
      ++num_batches;
    }
    epoch_loss /= num_batches;

    data.set_phase("validate");
    double val_nrmse = 0.0;
    try {
      for (const auto& ref : val_slices) {
        const ComplexKSpace& full = data.volume(ref.subject_id).slices[ref.slice_index];
        const auto out = model.forward(apply_mask(full, mask));
        val_nrmse += nrmse(out.fhat, magnitude(ifft2c(full)));
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_input)
        raise(ErrorKind::divergence,
              "fit: non-finite validation forward at epoch " +
                  std::to_string(epoch) + " (" + e.what() + ")");
      throw;
    }
    val_nrmse /= static_cast<double>(val_slices.size());
    if (!std::isfinite(val_nrmse))
      raise(ErrorKind::divergence, "fit: non-finite validation NRMSE at epoch " +
                                       std::to_string(epoch));

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.log.push_back({epoch, epoch_loss, val_nrmse, wall});
    if (result.best_epoch < 0 || val_nrmse < result.best_val_nrmse) {
      result.best_epoch = epoch;
      result.best_val_nrmse = val_nrmse;
      best_params = detail::snapshot_params(params);
    }
  }

  detail::restore_params(params, best_params);
  if (!log_csv.empty()) detail::write_log_csv(log_csv, result.log);
  return result;
}

/// Same loop for the image-domain baseline (zero-filled input, image NRMSE
/// loss only).
template <typename T>
FitResult fit_baseline(BaselineModel<T>& model, DataStore& data,
                       const TrainConfig& cfg, const SamplingMask& mask,
                       const std::filesystem::path& log_csv = {}) {
  cfg.validate();
  if (data.split().train.empty() || data.split().validation.empty())
    raise(ErrorKind::config, "fit: training and validation splits must be non-empty");

  std::vector<nn::ParamRef<T>> params;
  model.collect_params(params);
  nn::Adam<T> adam(params, cfg.learning_rate);

  data.set_phase("train");
  std::vector<SliceRef> train_slices = detail::list_slices(data, data.split().train);
  data.set_phase("validate");
  std::vector<SliceRef> val_slices =
      detail::list_slices(data, data.split().validation);

  FitResult result;
  std::vector<std::vector<T>> best_params;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    data.set_phase("train");
    std::vector<size_t> order(train_slices.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg.seed, seed_stream::kShuffle,
                                static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int num_batches = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      const double inv_n = 1.0 / static_cast<double>(end - start);
      model.zero_grad();
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const SliceRef& ref = train_slices[order[i]];
        const ComplexKSpace& full = data.volume(ref.subject_id).slices[ref.slice_index];
        const MagnitudeImage f_ref = magnitude(ifft2c(full));

        const auto diverged = [&](const std::string& why) {
          raise(ErrorKind::divergence,
                "fit_baseline: " + why + " at epoch " + std::to_string(epoch) +
                    ", batch " + std::to_string(num_batches) + " (subject " +
                    ref.subject_id + ", slice " +
                    std::to_string(ref.slice_index) + ")");
        };
        typename BaselineModel<T>::Cache cache;
        try {
          const MagnitudeImage fhat = model.forward(apply_mask(full, mask), cache);
          const auto parts = detail::nrmse_parts(fhat.data().data(),
                                                 f_ref.data().data(), f_ref.size(),
                                                 "fit_baseline");
          const double loss = parts.value();
          if (!std::isfinite(loss)) diverged("non-finite loss");
          batch_loss += loss * inv_n;
          RealGrid g_img(f_ref.height(), f_ref.width());
          if (parts.rmse > 0.0) {
            const double scale =
                inv_n / (static_cast<double>(f_ref.size()) * parts.rmse * parts.range);
            for (size_t j = 0; j < g_img.size(); ++j)
              g_img.data()[j] =
                  scale * (fhat.data()[j] - f_ref.data()[j]);
          }
          model.backward(g_img, cache);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::invalid_input)
            diverged(std::string("non-finite forward pass (") + e.what() + ")");
          throw;
        }
      }
      adam.step();
      epoch_loss += batch_loss;
      ++num_batches;
    }
    epoch_loss /= num_batches;

    data.set_phase("validate");
    double val_nrmse = 0.0;
    try {
      for (const auto& ref : val_slices) {
        const ComplexKSpace& full = data.volume(ref.subject_id).slices[ref.slice_index];
        val_nrmse += nrmse(model.forward(apply_mask(full, mask)),
                           magnitude(ifft2c(full)));
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_input)
        raise(ErrorKind::divergence,
              "fit_baseline: non-finite validation forward at epoch " +
                  std::to_string(epoch) + " (" + e.what() + ")");
      throw;
    }
    val_nrmse /= static_cast<double>(val_slices.size());
    if (!std::isfinite(val_nrmse))
      raise(ErrorKind::divergence,
            "fit_baseline: non-finite validation NRMSE at epoch " +
                std::to_string(epoch));

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    result.log.push_back({epoch, epoch_loss, val_nrmse, wall});
    if (result.best_epoch < 0 || val_nrmse < result.best_val_nrmse) {
      result.best_epoch = epoch;
      result.best_val_nrmse = val_nrmse;
      best_params = detail::snapshot_params(params);
    }
  }

  detail::restore_params(params, best_params);
  if (!log_csv.empty()) detail::write_log_csv(log_csv, result.log);
  return result;
}

} // namespace dualdomain
