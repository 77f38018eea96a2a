#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adx/core/error.hpp"
#include "adx/core/text.hpp"
#include "adx/nn/params.hpp"
#include "adx/optim/adamw.hpp"
#include "adx/pipeline/trainer.hpp"

namespace adx::app {

namespace fs = std::filesystem;

inline constexpr int kRunConfigSchemaVersion = 1;

struct Paths {
  fs::path train_metadata;  // English training split
  fs::path greek_metadata;  // 8-sample Greek pool
  fs::path test_metadata;   // Greek test split
  fs::path features_dir;
  fs::path output_dir = "out";
};

/// Every knob of a run. Serialized next to the artifacts it produced.
struct RunConfig {
  pipeline::Task task = pipeline::Task::ad;
  Paths paths;
  std::size_t ad_hidden_dim = 12;
  std::size_t mmse_hidden_dim = 8;
  double dropout_rate = 0.3;
  optim::TrainConfig train;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::uint64_t split_seed = 0;
  double train_fraction = 0.8;
  int repetitions = 1;
  bool parallel_seeds = false;
  std::vector<fs::path> ad_checkpoints;  // AD models feeding the MMSE covariate

  nn::ModelConfig model_config(pipeline::Task t) const {
    auto c = pipeline::default_model_config(t);
    c.hidden_dim = t == pipeline::Task::ad ? ad_hidden_dim : mmse_hidden_dim;
    c.dropout_rate = dropout_rate;
    return c;
  }
};

inline pipeline::Task parse_task(const std::string& s) {
  if (s == "ad") return pipeline::Task::ad;
  if (s == "mmse") return pipeline::Task::mmse;
  throw ConfigError("unknown task '" + s + "' (expected ad or mmse)");
}

inline nlohmann::json to_json(const RunConfig& c) {
  const auto& t = c.train;
  auto paths_list = [](const std::vector<fs::path>& v) {
    auto a = nlohmann::json::array();
    for (const auto& p : v) a.push_back(p.string());
    return a;
  };
  return {
      {"schema_version", kRunConfigSchemaVersion},
      {"task", std::string(pipeline::to_string(c.task))},
      {"paths",
       {{"train_metadata", c.paths.train_metadata.string()},
        {"greek_metadata", c.paths.greek_metadata.string()},
        {"test_metadata", c.paths.test_metadata.string()},
        {"features_dir", c.paths.features_dir.string()},
        {"output_dir", c.paths.output_dir.string()}}},
      {"model", {{"ad_hidden_dim", c.ad_hidden_dim}, {"mmse_hidden_dim", c.mmse_hidden_dim}, {"dropout_rate", c.dropout_rate}}},
      {"train",
       {{"base_lr", t.base_lr},
        {"warmup_steps", t.warmup_steps},
        {"weight_decay", t.weight_decay},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"epsilon", t.epsilon},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"seed", t.seed},
        {"decay_norm_and_bias", t.decay_norm_and_bias}}},
      {"seeds", c.seeds},
      {"split_seed", c.split_seed},
      {"train_fraction", c.train_fraction},
      {"repetitions", c.repetitions},
      {"parallel_seeds", c.parallel_seeds},
      {"ad_checkpoints", paths_list(c.ad_checkpoints)},
  };
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// Reads a run config; absent keys keep their defaults. Relative paths are
/// taken relative to `base_dir`.
inline RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  RunConfig c;
  try {
    detail::check_keys(j, {"schema_version", "task", "paths", "model", "train", "seeds", "split_seed",
                           "train_fraction", "repetitions", "parallel_seeds", "ad_checkpoints"},
                       "run config");
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kRunConfigSchemaVersion) {
      throw ConfigError("unsupported run config schema_version");
    }
    if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      detail::check_keys(p, {"train_metadata", "greek_metadata", "test_metadata", "features_dir", "output_dir"}, "paths");
      auto path_of = [&](const char* key, fs::path& dst) {
        if (p.contains(key)) dst = detail::resolve(base_dir, p.at(key).get<std::string>());
      };
      path_of("train_metadata", c.paths.train_metadata);
      path_of("greek_metadata", c.paths.greek_metadata);
      path_of("test_metadata", c.paths.test_metadata);
      path_of("features_dir", c.paths.features_dir);
      path_of("output_dir", c.paths.output_dir);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      detail::check_keys(m, {"ad_hidden_dim", "mmse_hidden_dim", "dropout_rate"}, "model");
      detail::read(m, "ad_hidden_dim", c.ad_hidden_dim);
      detail::read(m, "mmse_hidden_dim", c.mmse_hidden_dim);
      detail::read(m, "dropout_rate", c.dropout_rate);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      detail::check_keys(t, {"base_lr", "warmup_steps", "weight_decay", "beta1", "beta2", "epsilon", "batch_size",
                             "epochs", "seed", "decay_norm_and_bias"},
                         "train");
      detail::read(t, "base_lr", c.train.base_lr);
      detail::read(t, "warmup_steps", c.train.warmup_steps);
      detail::read(t, "weight_decay", c.train.weight_decay);
      detail::read(t, "beta1", c.train.beta1);
      detail::read(t, "beta2", c.train.beta2);
      detail::read(t, "epsilon", c.train.epsilon);
      detail::read(t, "batch_size", c.train.batch_size);
      detail::read(t, "epochs", c.train.epochs);
      detail::read(t, "seed", c.train.seed);
      detail::read(t, "decay_norm_and_bias", c.train.decay_norm_and_bias);
    }
    detail::read(j, "seeds", c.seeds);
    detail::read(j, "split_seed", c.split_seed);
    detail::read(j, "train_fraction", c.train_fraction);
    detail::read(j, "repetitions", c.repetitions);
    detail::read(j, "parallel_seeds", c.parallel_seeds);
    if (j.contains("ad_checkpoints")) {
      for (const auto& p : j.at("ad_checkpoints")) c.ad_checkpoints.push_back(detail::resolve(base_dir, p.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("run config not found: " + path.string());
  try {
    return from_json(nlohmann::json::parse(text::read_file(path)), path.parent_path());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("run config " + path.string() + " is not valid JSON: " + e.what());
  }
}

/// What a command needs from the config before it runs.
struct Requirements {
  bool training_data = false;  // train + greek metadata, features
  bool test_data = false;
  bool five_seeds = false;
};

inline void validate(const RunConfig& c, const Requirements& need) {
  c.train.validate();
  c.model_config(pipeline::Task::ad).validate();
  c.model_config(pipeline::Task::mmse).validate();
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0,1)");
  if (c.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  if (need.five_seeds && c.seeds.size() != 5) {
    throw ConfigError("pre-training needs exactly 5 seeds, got " + std::to_string(c.seeds.size()));
  }
  if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  auto must_exist = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("paths.") + what + " is not set");
    if (!fs::exists(p)) throw ConfigError(std::string("paths.") + what + " does not exist: " + p.string());
  };
  if (need.training_data || need.test_data) must_exist(c.paths.features_dir, "features_dir");
  if (need.training_data) {
    must_exist(c.paths.train_metadata, "train_metadata");
    must_exist(c.paths.greek_metadata, "greek_metadata");
  }
  if (need.test_data) must_exist(c.paths.test_metadata, "test_metadata");
}

}  // namespace adx::app
