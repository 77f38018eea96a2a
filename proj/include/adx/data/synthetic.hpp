#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "adx/core/random.hpp"
#include "adx/core/text.hpp"
#include "adx/data/io.hpp"
#include "adx/data/sample.hpp"

namespace adx::data {

/// Channels f0..f4 carry the class signal in generated data.
inline constexpr std::size_t kSignalChannels = 5;

struct SynthConfig {
  std::size_t n_per_class = 100;
  Language language = Language::english;
  double language_shift = 0.0;  // added to every acoustic channel
  double class_shift = 1.0;     // added to the signal channels of AD samples
  double noise = 1.0;           // per-value Gaussian std
  double mmse_noise = 1.5;      // std of the Gaussian before rounding
  std::uint64_t seed = 0;
  std::string id_prefix = "S";
};

/// Class-conditional Gaussian feature sequences with matching covariates
/// and MMSE scores 29 - 9*is_ad + round(noise), clamped to [0,30].
/// Ids alternate control, AD.
inline Dataset make_synthetic(const SynthConfig& config) {
  if (config.n_per_class < 2) throw ConfigError("synthetic n_per_class must be >= 2");
  Rng rng(derive_seed(config.seed, streams::synth));
  Dataset ds;
  const std::size_t n = 2 * config.n_per_class;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    char id[64];
    std::snprintf(id, sizeof(id), "%s%04zu", config.id_prefix.c_str(), i);
    s.id = id;
    s.language = config.language;
    const bool ad = (i % 2) == 1;
    s.diagnosis = ad ? Diagnosis::ad : Diagnosis::control;

    s.covariates.age = std::round(rng.uniform(55.0, 85.0));
    s.covariates.gender = static_cast<int>(rng.below(2));
    s.covariates.education = static_cast<double>(6 + rng.below(15));

    std::array<FeatureSequence::Row, kSegments> rows{};
    for (std::size_t t = 0; t < kSegments; ++t) {
      for (std::size_t c = 0; c < kFunctionals; ++c) {
        double v = config.language_shift + config.noise * rng.normal();
        if (ad && c < kSignalChannels) v += config.class_shift;
        rows[t][c] = v;
      }
    }
    s.features = FeatureSequence(rows);

    const double raw = 29.0 - 9.0 * (ad ? 1.0 : 0.0) + std::round(config.mmse_noise * rng.normal());
    s.mmse_raw = static_cast<int>(std::clamp(raw, 0.0, 30.0));
    s.mmse_normalized = normalize_mmse(*s.mmse_raw);
    ds.samples.push_back(std::move(s));
  }
  text::Digest digest;
  digest.update("synthetic:" + std::to_string(config.seed) + ":" + config.id_prefix + ":" +
                std::to_string(config.n_per_class));
  ds.provenance.digest = digest.hex();
  ds.provenance.log.push_back(
      "synthetic seed " + std::to_string(config.seed) + ", " + std::to_string(config.n_per_class) +
      " per class, language " + std::string(to_string(config.language)) + ", language_shift " +
      text::format_double(config.language_shift) + ", class_shift " + text::format_double(config.class_shift) +
      ", noise " + text::format_double(config.noise));
  return ds;
}

/// Metadata rows equivalent to `ds`, for writing a CSV the loaders accept.
inline std::vector<MetadataRecord> to_records(const Dataset& ds) {
  std::vector<MetadataRecord> out;
  std::size_t row = 0;
  for (const auto& s : ds.samples) {
    MetadataRecord r;
    r.id = s.id;
    r.language = s.language;
    r.age = s.covariates.age;
    r.gender = s.covariates.gender;
    r.education = s.covariates.education;
    r.diagnosis = s.diagnosis;
    r.mmse = s.mmse_raw;
    r.row = ++row;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace adx::data
