#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/core/random.hpp"
#include "adx/core/text.hpp"
#include "adx/data/prepare.hpp"
#include "adx/data/sample.hpp"
#include "adx/nn/checkpoint.hpp"
#include "adx/nn/model.hpp"
#include "adx/optim/adamw.hpp"
#include "adx/optim/loss.hpp"

namespace adx::pipeline {

/// AD detection (two logits, cross-entropy) or MMSE regression (sigmoid
/// output, squared error, AD probability as an extra covariate).
enum class Task { ad, mmse };

inline std::string_view to_string(Task t) { return t == Task::ad ? "ad" : "mmse"; }

inline bool uses_ad_probability(Task t) { return t == Task::mmse; }

inline nn::ModelConfig default_model_config(Task t) {
  return t == Task::ad ? nn::ModelConfig::ad_detection() : nn::ModelConfig::mmse_regression();
}

using Batch = std::vector<const data::Sample*>;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

/// Loss and dLoss/dOutputs for `outputs` against the batch's targets.
inline optim::LossResult task_loss(Task task, const Tensor& outputs, std::span<const data::Sample* const> batch) {
  if (task == Task::ad) {
    std::vector<int> labels;
    labels.reserve(batch.size());
    for (const auto* s : batch) {
      if (!s->diagnosis) throw DataError("sample '" + s->id + "' has no diagnosis label");
      labels.push_back(s->is_ad() ? 1 : 0);
    }
    return optim::cross_entropy(outputs, labels);
  }
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const auto* s : batch) {
    if (!s->mmse_normalized) throw DataError("sample '" + s->id + "' has no MMSE score");
    targets.push_back(*s->mmse_normalized);
  }
  return optim::mse_loss(outputs, targets);
}

/// Mean eval-mode loss over `entries` (repeats count once per occurrence).
inline double validation_loss(const nn::ModelParams& params, const nn::ModelConfig& config, Task task,
                              std::span<const data::Sample* const> entries) {
  if (entries.empty()) throw ConfigError("validation set is empty");
  const auto x = data::assemble_batch(entries, uses_ad_probability(task));
  const auto outputs = nn::model_infer(x, params, config);
  return task_loss(task, outputs, entries).loss;
}

/// Eval-mode accuracy of an AD model; labels follow the >= 0.5 rule.
inline double ad_accuracy(const nn::ModelParams& params, const nn::ModelConfig& config,
                          std::span<const data::Sample* const> samples) {
  if (samples.empty()) return 0.0;
  const auto outputs = nn::model_infer(data::assemble_batch(samples, false), params, config);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < samples.size(); ++b) {
    const double p_ad = 1.0 / (1.0 + std::exp(outputs(b, 0) - outputs(b, 1)));
    correct += ((p_ad >= 0.5) == samples[b]->is_ad()) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

struct TrainOutcome {
  nn::Checkpoint best;
  std::vector<EpochRecord> curve;
};

/// Runs `config.epochs` epochs of AdamW from `start`, asking `batches_for`
/// for each epoch's batches, and keeps the epoch with the lowest validation
/// loss. With zero epochs `start` is returned unchanged.
template <class BatchFn>
TrainOutcome train_model(const nn::Checkpoint& start, Task task, const optim::TrainConfig& config,
                         BatchFn&& batches_for, std::span<const data::Sample* const> val) {
  config.validate();
  TrainOutcome out{start, {}};
  if (config.epochs == 0) return out;

  const auto& mc = start.config;
  nn::ModelParams params = start.params;
  auto state = optim::OptimizerState::zeros(mc);
  Rng dropout_rng(derive_seed(config.seed, streams::dropout));
  const bool with_prob = uses_ad_probability(task);
  bool have_best = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<Batch> batches = batches_for(epoch);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : batches) {
      if (batch.empty()) continue;
      const auto x = data::assemble_batch(batch, with_prob);
      auto fwd = nn::model_forward(x, params, mc, dropout_rng, nn::Mode::train);
      auto loss = task_loss(task, fwd.outputs, batch);
      if (!std::isfinite(loss.loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      const auto grads = nn::model_backward(*fwd.cache, params, mc, loss.grad);
      optim::adamw_step(params, grads, state, config);
      loss_sum += loss.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    const double val_loss = validation_loss(params, mc, task, val);
    if (!std::isfinite(val_loss)) {
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    out.curve.push_back({epoch, seen ? loss_sum / static_cast<double>(seen) : 0.0, val_loss});
    if (!have_best || val_loss < out.best.val_loss) {
      out.best = nn::Checkpoint{mc, params, config.seed, epoch, val_loss};
      have_best = true;
    }
  }
  return out;
}

/// One line per epoch: `epoch,train_loss,val_loss`.
inline std::string format_run_log(const std::vector<EpochRecord>& curve) {
  std::string out = "epoch,train_loss,val_loss\n";
  for (const auto& r : curve) {
    out += std::to_string(r.epoch) + "," + text::format_double(r.train_loss) + "," +
           text::format_double(r.val_loss) + "\n";
  }
  return out;
}

}  // namespace adx::pipeline
