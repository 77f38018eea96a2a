#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/data/prepare.hpp"
#include "adx/nn/checkpoint.hpp"
#include "adx/pipeline/mixed_batches.hpp"
#include "adx/pipeline/trainer.hpp"

namespace adx::pipeline {

using SampleList = std::vector<data::Sample>;

inline void check_balanced(const SampleList& group, const std::string& what) {
  std::size_t ad = 0, control = 0;
  for (const auto& s : group) {
    if (!s.diagnosis) throw ConfigError(what + ": sample '" + s.id + "' has no diagnosis");
    (s.is_ad() ? ad : control) += 1;
  }
  if (group.empty() || ad != control) {
    throw ConfigError(what + " must hold equal AD and control counts, got " + std::to_string(ad) + " AD / " +
                      std::to_string(control) + " control");
  }
}

struct FinetuneResult {
  nn::Checkpoint checkpoint;
  std::vector<EpochRecord> curve;
};

/// Continues training `pretrained` on mixed batches of English training data
/// and `gr_train`. Validation uses English validation data with `gr_val`
/// inserted the same way. The optimizer and warmup start fresh.
inline FinetuneResult finetune(const nn::Checkpoint& pretrained, const data::Dataset& en_train,
                               const data::Dataset& en_val, const SampleList& gr_train, const SampleList& gr_val,
                               Task task, const optim::TrainConfig& config) {
  config.validate();
  check_balanced(gr_train, "Greek training quartet");
  check_balanced(gr_val, "Greek validation quartet");
  const auto en_train_ptrs = data::pointers(en_train);
  std::vector<const data::Sample*> gr_train_ptrs, gr_val_ptrs;
  for (const auto& s : gr_train) gr_train_ptrs.push_back(&s);
  for (const auto& s : gr_val) gr_val_ptrs.push_back(&s);
  const auto val_entries = flatten(mixed_batches(data::pointers(en_val), gr_val_ptrs, config.batch_size, config.seed, 0));

  auto outcome = train_model(
      pretrained, task, config,
      [&](int epoch) { return mixed_batches(en_train_ptrs, gr_train_ptrs, config.batch_size, config.seed, epoch); },
      val_entries);
  return {std::move(outcome.best), std::move(outcome.curve)};
}

/// Splits the Greek pool into two class-balanced halves: each class sorted by
/// id, alternating members go to the first and second half.
inline std::pair<SampleList, SampleList> partition_greek(const SampleList& pool) {
  SampleList ad, control;
  for (const auto& s : pool) {
    if (!s.diagnosis) throw ConfigError("Greek sample '" + s.id + "' has no diagnosis");
    (s.is_ad() ? ad : control).push_back(s);
  }
  if (ad.size() != control.size() || ad.size() < 2 || ad.size() % 2 != 0) {
    throw ConfigError("Greek pool must hold equal, even AD and control counts (4 + 4), got " +
                      std::to_string(ad.size()) + " AD / " + std::to_string(control.size()) + " control");
  }
  auto by_id = [](const data::Sample& a, const data::Sample& b) { return a.id < b.id; };
  std::sort(ad.begin(), ad.end(), by_id);
  std::sort(control.begin(), control.end(), by_id);
  std::pair<SampleList, SampleList> halves;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    auto& dst = i % 2 == 0 ? halves.first : halves.second;
    dst.push_back(ad[i]);
    dst.push_back(control[i]);
  }
  return halves;
}

/// Elementwise mean of every learnable and both running-statistic buffers.
inline nn::ModelParams average_params(const nn::ModelParams& a, const nn::ModelParams& b) {
  if (!nn::same_shapes(a, b) || a.bn_running_mean.shape() != b.bn_running_mean.shape() ||
      a.bn_running_var.shape() != b.bn_running_var.shape()) {
    throw ConsistencyError("cannot average parameters of different shapes");
  }
  auto mean_into = [](Tensor& dst, const Tensor& x, const Tensor& y) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = 0.5 * (x[i] + y[i]);
  };
  nn::ModelParams out = a;
  for (const auto& f : nn::learnable_fields) mean_into(out.*f.member, a.*f.member, b.*f.member);
  mean_into(out.bn_running_mean, a.bn_running_mean, b.bn_running_mean);
  mean_into(out.bn_running_var, a.bn_running_var, b.bn_running_var);
  return out;
}

struct SwapAverageResult {
  nn::Checkpoint averaged;
  FinetuneResult first;   // trained on the first Greek half
  FinetuneResult second;  // trained on the second Greek half
};

/// Fine-tunes twice with the Greek halves in swapped train/validation roles
/// and averages the two resulting models.
inline SwapAverageResult swap_and_average(const nn::Checkpoint& pretrained, const data::Dataset& en_train,
                                          const data::Dataset& en_val, const SampleList& greek_pool, Task task,
                                          const optim::TrainConfig& config) {
  const auto [half_a, half_b] = partition_greek(greek_pool);
  SwapAverageResult r;
  r.first = finetune(pretrained, en_train, en_val, half_a, half_b, task, config);
  r.second = finetune(pretrained, en_train, en_val, half_b, half_a, task, config);
  r.averaged = nn::Checkpoint{pretrained.config,
                              average_params(r.first.checkpoint.params, r.second.checkpoint.params),
                              config.seed, 0,
                              0.5 * (r.first.checkpoint.val_loss + r.second.checkpoint.val_loss)};
  return r;
}

}  // namespace adx::pipeline
