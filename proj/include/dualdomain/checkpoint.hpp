#pragma once

#include <cstring>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "dualdomain/container.hpp"
#include "dualdomain/training.hpp"

namespace dualdomain {

inline nlohmann::json unet_config_to_json(const UNetConfig& c) {
  return {{"levels", c.levels},
          {"base_channels", c.base_channels},
          {"kernel_size", c.kernel_size},
          {"in_channels", c.in_channels},
          {"out_channels", c.out_channels},
          {"residual", c.residual}};
}

inline UNetConfig unet_config_from_json(const nlohmann::json& j) {
  UNetConfig c;
  c.levels = j.at("levels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.kernel_size = j.at("kernel_size").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.out_channels = j.at("out_channels").get<int>();
  c.residual = j.at("residual").get<bool>();
  c.validate();
  return c;
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"w1", c.w1},
          {"w2", c.w2},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"acceleration", c.acceleration},
          {"center_fraction", c.center_fraction},
          {"mask_mode", to_string(c.mask_mode)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.w1 = j.at("w1").get<double>();
  c.w2 = j.at("w2").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  c.acceleration = j.at("acceleration").get<double>();
  c.center_fraction = j.at("center_fraction").get<double>();
  c.mask_mode = mask_mode_from_string(j.at("mask_mode").get<std::string>());
  return c;
}

namespace detail {

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "float32";
  else if constexpr (std::is_same_v<T, double>) return "float64";
  else static_assert(sizeof(T) == 0, "unsupported checkpoint scalar");
}

template <typename T>
void append_tensor_payload(std::vector<uint8_t>& payload,
                           const std::vector<T>& v) {
  const size_t old = payload.size();
  payload.resize(old + v.size() * sizeof(T));
  std::memcpy(payload.data() + old, v.data(), v.size() * sizeof(T));
}

template <typename T>
void read_tensor_payload(const std::vector<uint8_t>& payload, size_t& offset,
                         std::vector<T>& v, const std::string& origin) {
  const size_t bytes = v.size() * sizeof(T);
  if (offset + bytes > payload.size())
    raise(ErrorKind::format, origin + ": checkpoint payload truncated");
  std::memcpy(v.data(), payload.data() + offset, bytes);
  offset += bytes;
}

} // namespace detail

constexpr int kCheckpointFormatVersion = 1;

/// Everything needed to reproduce the model and its evaluation setup.
struct CheckpointMeta {
  std::string model; // "hybrid" | "baseline"
  int epoch = 0;
  double validation_nrmse = 0.0;
  uint64_t init_seed = 0;
  uint64_t mask_seed = 0; // fixed evaluation/training mask
  TrainConfig train;
  UNetConfig freq_net;  // hybrid only
  UNetConfig image_net; // hybrid: image net; baseline: the single net
  NormStats kspace_stats;
  NormStats image_stats;
  int data_height = 0, data_width = 0;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, HybridModel<T>& model,
                     const CheckpointMeta& meta) {
  std::vector<nn::ParamRef<T>> params;
  model.collect_params(params);
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<uint8_t> payload;
  for (auto& p : params) {
    tensors.push_back({{"name", p.name}, {"size", p.value->size()}});
    detail::append_tensor_payload(payload, *p.value);
  }
  nlohmann::json header{
      {"kind", "checkpoint"},
      {"version", kCheckpointFormatVersion},
      {"model", "hybrid"},
      {"dtype", detail::dtype_name<T>()},
      {"epoch", meta.epoch},
      {"validation_nrmse", meta.validation_nrmse},
      {"init_seed", meta.init_seed},
      {"mask_seed", meta.mask_seed},
      {"train_config", train_config_to_json(meta.train)},
      {"freq_net", unet_config_to_json(model.freq_net().config())},
      {"image_net", unet_config_to_json(model.image_net().config())},
      {"kspace_stats", {{"mean", model.kspace_stats().mean}, {"std", model.kspace_stats().std}}},
      {"image_stats", {{"mean", model.image_stats().mean}, {"std", model.image_stats().std}}},
      {"data_shape", {meta.data_height, meta.data_width}},
      {"tensors", tensors},
  };
  write_container(path, header, payload);
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, BaselineModel<T>& model,
                     const CheckpointMeta& meta) {
  std::vector<nn::ParamRef<T>> params;
  model.collect_params(params);
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<uint8_t> payload;
  for (auto& p : params) {
    tensors.push_back({{"name", p.name}, {"size", p.value->size()}});
    detail::append_tensor_payload(payload, *p.value);
  }
  nlohmann::json header{
      {"kind", "checkpoint"},
      {"version", kCheckpointFormatVersion},
      {"model", "baseline"},
      {"dtype", detail::dtype_name<T>()},
      {"epoch", meta.epoch},
      {"validation_nrmse", meta.validation_nrmse},
      {"init_seed", meta.init_seed},
      {"mask_seed", meta.mask_seed},
      {"train_config", train_config_to_json(meta.train)},
      {"image_net", unet_config_to_json(model.net().config())},
      {"image_stats", {{"mean", model.image_stats().mean}, {"std", model.image_stats().std}}},
      {"data_shape", {meta.data_height, meta.data_width}},
      {"tensors", tensors},
  };
  write_container(path, header, payload);
}

namespace detail {

inline Container open_checkpoint(const std::filesystem::path& path,
                                 const char* expected_dtype,
                                 const std::string& expected_model,
                                 CheckpointMeta& meta) {
  Container c = read_container(path);
  const std::string origin = path.string();
  if (c.header.value("kind", std::string{}) != "checkpoint")
    raise(ErrorKind::format, origin + ": not a checkpoint container");
  if (c.header.value("version", -1) != kCheckpointFormatVersion)
    raise(ErrorKind::config, origin + ": unsupported checkpoint version");
  if (c.header.value("dtype", std::string{}) != expected_dtype)
    raise(ErrorKind::config, origin + ": checkpoint dtype is " +
                                 c.header.value("dtype", std::string{}) +
                                 ", expected " + expected_dtype);
  meta.model = c.header.value("model", std::string{});
  if (meta.model != expected_model)
    raise(ErrorKind::config, origin + ": checkpoint holds a " + meta.model +
                                 " model, expected " + expected_model);
  meta.epoch = c.header.value("epoch", 0);
  meta.validation_nrmse = c.header.value("validation_nrmse", 0.0);
  meta.init_seed = c.header.value("init_seed", uint64_t{0});
  meta.mask_seed = c.header.value("mask_seed", uint64_t{0});
  meta.train = train_config_from_json(c.header.at("train_config"));
  meta.image_stats = NormStats{c.header.at("image_stats").at("mean").get<double>(),
                               c.header.at("image_stats").at("std").get<double>()};
  const auto shape = c.header.at("data_shape");
  meta.data_height = shape.at(0).get<int>();
  meta.data_width = shape.at(1).get<int>();
  return c;
}

} // namespace detail

template <typename T>
HybridModel<T> load_hybrid_checkpoint(const std::filesystem::path& path,
                                      CheckpointMeta& meta) {
  Container c =
      detail::open_checkpoint(path, detail::dtype_name<T>(), "hybrid", meta);
  meta.freq_net = unet_config_from_json(c.header.at("freq_net"));
  meta.image_net = unet_config_from_json(c.header.at("image_net"));
  meta.kspace_stats = NormStats{c.header.at("kspace_stats").at("mean").get<double>(),
                                c.header.at("kspace_stats").at("std").get<double>()};
  HybridModel<T> model(meta.freq_net, meta.image_net, meta.kspace_stats,
                       meta.image_stats, meta.init_seed);
  std::vector<nn::ParamRef<T>> params;
  model.collect_params(params);
  const auto tensors = c.header.at("tensors");
  if (tensors.size() != params.size())
    raise(ErrorKind::format, path.string() + ": tensor list mismatch");
  size_t offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != params[i].name ||
        tensors[i].at("size").get<size_t>() != params[i].value->size())
      raise(ErrorKind::format,
            path.string() + ": tensor layout mismatch at " + params[i].name);
    detail::read_tensor_payload(c.payload, offset, *params[i].value,
                                path.string());
  }
  if (offset != c.payload.size())
    raise(ErrorKind::format, path.string() + ": trailing checkpoint payload");
  return model;
}

template <typename T>
BaselineModel<T> load_baseline_checkpoint(const std::filesystem::path& path,
                                          CheckpointMeta& meta) {
  Container c =
      detail::open_checkpoint(path, detail::dtype_name<T>(), "baseline", meta);
  meta.image_net = unet_config_from_json(c.header.at("image_net"));
  BaselineModel<T> model(meta.image_net, meta.image_stats, meta.init_seed);
  std::vector<nn::ParamRef<T>> params;
  model.collect_params(params);
  const auto tensors = c.header.at("tensors");
  if (tensors.size() != params.size())
    raise(ErrorKind::format, path.string() + ": tensor list mismatch");
  size_t offset = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].at("name").get<std::string>() != params[i].name ||
        tensors[i].at("size").get<size_t>() != params[i].value->size())
      raise(ErrorKind::format,
            path.string() + ": tensor layout mismatch at " + params[i].name);
    detail::read_tensor_payload(c.payload, offset, *params[i].value,
                                path.string());
  }
  return model;
}

/// Detects which model kind a checkpoint holds without loading tensors.
inline std::string checkpoint_model_kind(const std::filesystem::path& path) {
  return read_container(path).header.value("model", std::string{});
}

} // namespace dualdomain
