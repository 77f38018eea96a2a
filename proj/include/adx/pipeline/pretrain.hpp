#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/data/prepare.hpp"
#include "adx/nn/checkpoint.hpp"
#include "adx/pipeline/mixed_batches.hpp"
#include "adx/pipeline/trainer.hpp"

namespace adx::pipeline {

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> curve;
  std::optional<nn::Checkpoint> best;  // absent when the run failed
  std::string failure;
};

struct RunArtifacts {
  std::vector<SeedRun> runs;
  nn::Checkpoint selected;
  std::size_t selected_run = 0;
  std::string rationale;
};

/// Index of the smallest finite loss; ties go to the earlier run. Absent
/// entries are failed runs.
inline std::size_t select_best_run(std::span<const std::optional<double>> best_losses) {
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < best_losses.size(); ++i) {
    if (!best_losses[i] || !std::isfinite(*best_losses[i])) continue;
    if (!pick || *best_losses[i] < *best_losses[*pick]) pick = i;
  }
  if (!pick) throw NumericalError("every pre-training run failed");
  return *pick;
}

inline SeedRun pretrain_one(const data::Dataset& train, const data::Dataset& val, Task task,
                            const nn::ModelConfig& model_config, optim::TrainConfig config,
                            std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  config.seed = seed;
  const auto train_ptrs = data::pointers(train);
  const auto val_ptrs = data::pointers(val);
  nn::Checkpoint start{model_config, nn::init_params(model_config, seed), seed, 0, 0.0};
  try {
    auto outcome = train_model(
        start, task, config,
        [&](int epoch) { return shuffled_batches(train_ptrs, config.batch_size, seed, epoch); }, val_ptrs);
    run.curve = std::move(outcome.curve);
    run.best = std::move(outcome.best);
  } catch (const NumericalError& e) {
    run.failure = e.what();
  }
  return run;
}

/// Trains one model per seed from scratch and selects the checkpoint with
/// the lowest validation loss across all runs. With `parallel` the runs use
/// one thread each; results are identical to the serial order.
inline RunArtifacts pretrain(const data::Dataset& train, const data::Dataset& val, Task task,
                             const nn::ModelConfig& model_config, const optim::TrainConfig& config,
                             std::span<const std::uint64_t> seeds, bool parallel = false) {
  config.validate();
  model_config.validate();
  if (seeds.empty()) throw ConfigError("pretrain needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("pretrain seeds must be distinct");
  }
  if (config.epochs < 1) throw ConfigError("pretrain needs at least one epoch");

  RunArtifacts art;
  art.runs.resize(seeds.size());
  if (parallel && seeds.size() > 1) {
    std::vector<std::exception_ptr> errors(seeds.size());
    {
      std::vector<std::jthread> workers;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        workers.emplace_back([&, i] {
          try {
            art.runs[i] = pretrain_one(train, val, task, model_config, config, seeds[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      art.runs[i] = pretrain_one(train, val, task, model_config, config, seeds[i]);
    }
  }

  std::vector<std::optional<double>> best_losses;
  for (const auto& r : art.runs) {
    best_losses.push_back(r.best ? std::optional<double>(r.best->val_loss) : std::nullopt);
  }
  art.selected_run = select_best_run(best_losses);
  art.selected = *art.runs[art.selected_run].best;
  art.rationale = "seed " + std::to_string(art.selected.seed) + " epoch " + std::to_string(art.selected.epoch) +
                  " has the lowest validation loss " + text::format_double(art.selected.val_loss) + " among";
  for (std::size_t i = 0; i < art.runs.size(); ++i) {
    const auto& r = art.runs[i];
    art.rationale += (i ? ", " : " ") + std::to_string(r.seed) + "=" +
                     (r.best ? text::format_double(r.best->val_loss) : std::string("failed"));
  }
  return art;
}

}  // namespace adx::pipeline
