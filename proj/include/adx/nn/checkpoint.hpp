#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "adx/core/error.hpp"
#include "adx/core/text.hpp"
#include "adx/nn/params.hpp"

namespace adx::nn {

inline constexpr int kCheckpointSchemaVersion = 1;

/// A model snapshot plus where it came from.
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  std::uint64_t seed = 0;
  int epoch = 0;
  double val_loss = 0.0;

  bool operator==(const Checkpoint&) const = default;
};

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden_dim", c.hidden_dim},
          {"output_dim", c.output_dim},
          {"dropout_rate", c.dropout_rate},
          {"seq_len", c.seq_len}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seq_len = j.value("seq_len", std::size_t{10});
  c.validate();
  return c;
}

namespace detail {

inline nlohmann::json tensor_to_json(const Tensor& t) {
  auto values = nlohmann::json::array();
  for (double v : t.values()) values.push_back(v);
  return {{"shape", t.shape()}, {"values", std::move(values)}};
}

inline Tensor tensor_from_json(const nlohmann::json& j, std::string_view name) {
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != Tensor::element_count(shape)) {
    throw DataError("checkpoint tensor " + std::string(name) + ": " + std::to_string(values.size()) +
                    " values for shape " + shape_string(shape));
  }
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& f : learnable_fields) {
    tensors[std::string(f.name)] = detail::tensor_to_json(ck.params.*f.member);
  }
  tensors["bn_running_mean"] = detail::tensor_to_json(ck.params.bn_running_mean);
  tensors["bn_running_var"] = detail::tensor_to_json(ck.params.bn_running_var);
  return {{"schema_version", kCheckpointSchemaVersion},
          {"model_config", config_to_json(ck.config)},
          {"tensors", std::move(tensors)},
          {"provenance", {{"seed", ck.seed}, {"epoch", ck.epoch}, {"val_loss", ck.val_loss}}}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kCheckpointSchemaVersion) {
      throw DataError("unsupported checkpoint schema_version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.config = config_from_json(j.at("model_config"));
    const auto& tensors = j.at("tensors");
    for (const auto& f : learnable_fields) {
      ck.params.*f.member = detail::tensor_from_json(tensors.at(std::string(f.name)), f.name);
    }
    ck.params.bn_running_mean = detail::tensor_from_json(tensors.at("bn_running_mean"), "bn_running_mean");
    ck.params.bn_running_var = detail::tensor_from_json(tensors.at("bn_running_var"), "bn_running_var");
    const auto& prov = j.at("provenance");
    ck.seed = prov.at("seed").get<std::uint64_t>();
    ck.epoch = prov.at("epoch").get<int>();
    ck.val_loss = prov.at("val_loss").get<double>();
    check_params(ck.params, ck.config);
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConsistencyError& e) {
    throw DataError(std::string("inconsistent checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  text::write_file(path, checkpoint_to_json(ck).dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return checkpoint_from_json(nlohmann::json::parse(text::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace adx::nn
