#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/core/random.hpp"
#include "adx/core/tensor.hpp"
#include "adx/core/text.hpp"
#include "adx/data/io.hpp"
#include "adx/data/sample.hpp"

namespace adx::data {

struct PrepareOptions {
  bool drop_missing_mmse = true;
  bool balance = true;
};

/// Joins metadata with features and applies, in order: drop rows without an
/// MMSE score, impute missing education to 12 years, balance the classes by
/// dropping the excess class's lexicographically largest ids.
inline Dataset prepare_dataset(const std::vector<MetadataRecord>& records, const FeatureSet& features,
                               const PrepareOptions& options = {}, std::string source_digest = {}) {
  Dataset ds;
  auto& log = ds.provenance.log;
  log.push_back("input records: " + std::to_string(records.size()));

  std::vector<std::string> dropped_score, imputed;
  for (const auto& r : records) {
    auto it = features.sequences.find(r.id);
    if (it == features.sequences.end()) {
      throw DataError("no feature sequence for id '" + r.id + "' (metadata row " + std::to_string(r.row) + ")");
    }
    if (options.drop_missing_mmse && !r.mmse) {
      dropped_score.push_back(r.id);
      continue;
    }
    Sample s;
    s.id = r.id;
    s.language = r.language;
    s.features = it->second;
    s.covariates.age = r.age;
    s.covariates.gender = r.gender;
    if (r.education) {
      s.covariates.education = *r.education;
    } else {
      s.covariates.education = kDefaultEducationYears;
      imputed.push_back(r.id);
    }
    s.diagnosis = r.diagnosis;
    if (r.mmse) {
      s.mmse_raw = *r.mmse;
      s.mmse_normalized = normalize_mmse(*r.mmse);
    }
    ds.samples.push_back(std::move(s));
  }

  auto join = [](const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) out += (out.empty() ? "" : " ") + id;
    return out;
  };
  log.push_back("dropped (no MMSE score): " + std::to_string(dropped_score.size()) +
                (dropped_score.empty() ? "" : " [" + join(dropped_score) + "]"));
  log.push_back("education imputed to 12 years: " + std::to_string(imputed.size()) +
                (imputed.empty() ? "" : " [" + join(imputed) + "]"));

  if (options.balance) {
    for (const auto& s : ds.samples) {
      if (!s.diagnosis) throw DataError("cannot balance: sample '" + s.id + "' has no diagnosis");
    }
    const auto n_ad = ds.count(Diagnosis::ad), n_control = ds.count(Diagnosis::control);
    const auto excess_class = n_ad > n_control ? Diagnosis::ad : Diagnosis::control;
    const auto excess = n_ad > n_control ? n_ad - n_control : n_control - n_ad;
    std::vector<std::string> candidates;
    for (const auto& s : ds.samples) {
      if (s.diagnosis == excess_class) candidates.push_back(s.id);
    }
    std::sort(candidates.begin(), candidates.end());
    const std::vector<std::string> removed(candidates.end() - static_cast<std::ptrdiff_t>(excess),
                                           candidates.end());
    std::erase_if(ds.samples, [&](const Sample& s) {
      return std::binary_search(removed.begin(), removed.end(), s.id);
    });
    log.push_back("balanced by dropping " + std::to_string(removed.size()) + " " +
                  std::string(to_string(excess_class)) +
                  (removed.empty() ? "" : " [" + join(removed) + "]"));
  }

  if (ds.samples.empty()) throw DataError("prepared dataset is empty");
  log.push_back("prepared samples: " + std::to_string(ds.size()) + " (" +
                std::to_string(ds.count(Diagnosis::ad)) + " ad)");

  text::Digest digest;
  digest.update(source_digest);
  digest.update(features.digest);
  ds.provenance.digest = digest.hex();
  return ds;
}

inline Dataset prepare_dataset(const MetadataTable& table, const FeatureSet& features,
                               const PrepareOptions& options = {}) {
  return prepare_dataset(table.records, features, options, table.digest);
}

struct Split {
  Dataset train;
  Dataset val;
};

/// Seeded split stratified by diagnosis. Each stratum of n sends
/// round(fraction * n) samples to train, clamped so both sides get at least
/// one. Output keeps the input order.
inline Split split_train_val(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("split fraction must lie in (0,1), got " + std::to_string(fraction));
  }
  std::vector<char> in_train(dataset.size(), 0);
  Rng rng(derive_seed(seed, streams::split));
  for (const auto cls : {Diagnosis::control, Diagnosis::ad}) {
    std::vector<std::size_t> stratum;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& s = dataset.samples[i];
      if (!s.diagnosis) throw DataError("cannot stratify: sample '" + s.id + "' has no diagnosis");
      if (*s.diagnosis == cls) stratum.push_back(i);
    }
    if (stratum.size() < 2) {
      throw DataError("stratum '" + std::string(to_string(cls)) + "' has " + std::to_string(stratum.size()) +
                      " samples; at least 2 are needed to split");
    }
    rng.shuffle(std::span<std::size_t>(stratum));
    auto n_train = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(stratum.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, stratum.size() - 1);
    for (std::size_t k = 0; k < n_train; ++k) in_train[stratum[k]] = 1;
  }
  Split out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (in_train[i] ? out.train : out.val).samples.push_back(dataset.samples[i]);
  }
  for (auto* part : {&out.train, &out.val}) {
    part->provenance = dataset.provenance;
    part->provenance.log.push_back("split fraction " + text::format_double(fraction) + " seed " +
                                   std::to_string(seed) + ": " + std::to_string(out.train.size()) +
                                   " train / " + std::to_string(out.val.size()) + " val");
  }
  return out;
}

/// Width of an assembled input row.
inline std::size_t input_width(bool include_ad_prob) { return kFunctionals + 3 + (include_ad_prob ? 1 : 0); }

/// Writes one [10, d] sample into `dst` (row-major, d = 28 or 29): the 25
/// acoustic values, then age, gender, education and optionally the AD
/// probability, repeated on every row.
inline void assemble_into(const Sample& sample, bool include_ad_prob, std::span<double> dst) {
  const std::size_t d = input_width(include_ad_prob);
  if (dst.size() != kSegments * d) throw DimensionError("assemble_input: destination has wrong size");
  if (include_ad_prob && !sample.covariates.ad_probability) {
    throw DataError("sample '" + sample.id + "' is missing covariate ad_probability");
  }
  const auto& cov = sample.covariates;
  for (std::size_t t = 0; t < kSegments; ++t) {
    double* row = dst.data() + t * d;
    for (std::size_t f = 0; f < kFunctionals; ++f) row[f] = sample.features(t, f);
    row[kFunctionals] = cov.age;
    row[kFunctionals + 1] = static_cast<double>(cov.gender);
    row[kFunctionals + 2] = cov.education;
    if (include_ad_prob) row[kFunctionals + 3] = *cov.ad_probability;
  }
}

inline Tensor assemble_input(const Sample& sample, bool include_ad_prob) {
  Tensor out({kSegments, input_width(include_ad_prob)});
  assemble_into(sample, include_ad_prob, out.values());
  return out;
}

/// Stacks samples into a [B, 10, d] model input.
inline Tensor assemble_batch(std::span<const Sample* const> batch, bool include_ad_prob) {
  const std::size_t d = input_width(include_ad_prob);
  Tensor out({batch.size(), kSegments, d});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    assemble_into(*batch[b], include_ad_prob, out.values().subspan(b * kSegments * d, kSegments * d));
  }
  return out;
}

inline std::vector<const Sample*> pointers(const Dataset& ds) {
  std::vector<const Sample*> out;
  out.reserve(ds.size());
  for (const auto& s : ds.samples) out.push_back(&s);
  return out;
}

}  // namespace adx::data
