#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/data/prepare.hpp"
#include "adx/nn/checkpoint.hpp"
#include "adx/nn/model.hpp"

namespace adx::pipeline {

struct AdPrediction {
  std::string id;
  double probability = 0.0;  // mean AD-class softmax probability over models
  data::Diagnosis label = data::Diagnosis::control;

  bool operator==(const AdPrediction&) const = default;
};

struct MmsePrediction {
  std::string id;
  double score = 0.0;  // 0-30 scale

  bool operator==(const MmsePrediction&) const = default;
};

/// Probability threshold; a tie is labeled AD.
inline data::Diagnosis label_for(double probability) {
  return probability >= 0.5 ? data::Diagnosis::ad : data::Diagnosis::control;
}

/// AD-class probability from two logits.
inline double ad_probability(double logit_control, double logit_ad) {
  return 1.0 / (1.0 + std::exp(logit_control - logit_ad));
}

/// Mean of per-model probabilities, summed in ascending order so the result
/// does not depend on model order.
inline double ensemble_mean(std::vector<double> probabilities) {
  std::sort(probabilities.begin(), probabilities.end());
  double s = 0.0;
  for (double p : probabilities) s += p;
  return s / static_cast<double>(probabilities.size());
}

inline std::vector<AdPrediction> predict_ad(std::span<const nn::Checkpoint> models, const data::Dataset& dataset) {
  if (models.empty()) throw ConfigError("predict_ad needs at least one model");
  const auto& config = models.front().config;
  for (const auto& m : models) {
    if (!(m.config == config)) throw ConfigError("predict_ad: models do not share one model configuration");
  }
  if (config.output_dim != 2) throw ConfigError("predict_ad: model is not an AD detection model");
  std::vector<AdPrediction> out(dataset.size());
  if (dataset.size() == 0) return out;

  const auto samples = data::pointers(dataset);
  const auto x = data::assemble_batch(samples, false);
  std::vector<std::vector<double>> per_sample(dataset.size());
  for (const auto& m : models) {
    const auto logits = nn::model_infer(x, m.params, config);
    for (std::size_t b = 0; b < dataset.size(); ++b) {
      per_sample[b].push_back(ad_probability(logits(b, 0), logits(b, 1)));
    }
  }
  for (std::size_t b = 0; b < dataset.size(); ++b) {
    out[b].id = dataset.samples[b].id;
    out[b].probability = ensemble_mean(per_sample[b]);
    out[b].label = label_for(out[b].probability);
  }
  return out;
}

inline std::vector<AdPrediction> predict_ad(const nn::Checkpoint& model, const data::Dataset& dataset) {
  return predict_ad(std::span<const nn::Checkpoint>(&model, 1), dataset);
}

inline std::map<std::string, double> probability_map(std::span<const AdPrediction> preds) {
  std::map<std::string, double> out;
  for (const auto& p : preds) out[p.id] = p.probability;
  return out;
}

/// Copy of `dataset` with each sample's AD-probability covariate filled in.
inline data::Dataset with_ad_probabilities(data::Dataset dataset, const std::map<std::string, double>& probs) {
  for (auto& s : dataset.samples) {
    auto it = probs.find(s.id);
    if (it == probs.end()) throw DataError("no AD probability for sample '" + s.id + "'");
    s.covariates.ad_probability = it->second;
  }
  return dataset;
}

/// Scores on the 0-30 scale from a regression model, with `ad_probs`
/// supplying the extra covariate.
inline std::vector<MmsePrediction> predict_mmse(const nn::Checkpoint& model, const data::Dataset& dataset,
                                                const std::map<std::string, double>& ad_probs) {
  if (model.config.output_dim != 1) throw ConfigError("predict_mmse: model is not an MMSE regression model");
  const auto ds = with_ad_probabilities(dataset, ad_probs);
  std::vector<MmsePrediction> out(ds.size());
  if (ds.size() == 0) return out;
  const auto outputs = nn::model_infer(data::assemble_batch(data::pointers(ds), true), model.params, model.config);
  for (std::size_t b = 0; b < ds.size(); ++b) {
    out[b].id = ds.samples[b].id;
    out[b].score = data::denormalize_mmse(outputs(b, 0));
  }
  return out;
}

}  // namespace adx::pipeline
