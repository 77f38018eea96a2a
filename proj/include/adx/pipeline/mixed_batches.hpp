#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/core/random.hpp"
#include "adx/data/sample.hpp"
#include "adx/pipeline/trainer.hpp"

namespace adx::pipeline {

/// Target-language samples go at 0-based positions 4, 9, 14, ...
inline constexpr std::size_t kGreekStride = 5;

inline bool is_greek_position(std::size_t position) { return position % kGreekStride == kGreekStride - 1; }

/// English samples shuffled for `epoch` and cut into batches of `batch_size`.
inline std::vector<Batch> shuffled_batches(std::span<const data::Sample* const> samples, int batch_size,
                                           std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<const data::Sample*> order(samples.begin(), samples.end());
  Rng rng(derive_seed(derive_seed(seed, streams::shuffle), static_cast<std::uint64_t>(epoch)));
  rng.shuffle(std::span(order));
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

/// Builds one epoch of mixed-language batches. English samples are shuffled
/// per epoch and fill every position except 4, 9, 14, ..., which take Greek
/// samples round-robin from a seeded per-epoch rotation that carries across
/// batches. Displaced English samples move to later batches, so each English
/// sample appears exactly once; only the final batch may be short, and a
/// Greek position it reaches is still filled.
inline std::vector<Batch> mixed_batches(std::span<const data::Sample* const> english,
                                        std::span<const data::Sample* const> greek, int batch_size,
                                        std::uint64_t seed, int epoch) {
  if (batch_size < static_cast<int>(kGreekStride)) {
    throw ConfigError("mixed batches need batch_size >= 5 to hold a Greek position, got " +
                      std::to_string(batch_size));
  }
  if (greek.empty()) throw ConfigError("mixed batches need at least one Greek sample");

  std::vector<const data::Sample*> order(english.begin(), english.end());
  Rng shuffle_rng(derive_seed(derive_seed(seed, streams::shuffle), static_cast<std::uint64_t>(epoch)));
  shuffle_rng.shuffle(std::span(order));

  std::vector<std::size_t> rotation(greek.size());
  std::iota(rotation.begin(), rotation.end(), std::size_t{0});
  Rng rotation_rng(derive_seed(derive_seed(seed, streams::greek_rotation), static_cast<std::uint64_t>(epoch)));
  rotation_rng.shuffle(std::span(rotation));

  std::vector<Batch> batches;
  std::size_t next_english = 0, next_greek = 0;
  const auto size = static_cast<std::size_t>(batch_size);
  while (next_english < order.size()) {
    Batch batch;
    batch.reserve(size);
    for (std::size_t pos = 0; pos < size; ++pos) {
      if (is_greek_position(pos)) {
        batch.push_back(greek[rotation[next_greek % rotation.size()]]);
        ++next_greek;
      } else if (next_english < order.size()) {
        batch.push_back(order[next_english++]);
      } else {
        break;
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

inline std::vector<const data::Sample*> flatten(const std::vector<Batch>& batches) {
  std::vector<const data::Sample*> out;
  for (const auto& b : batches) out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace adx::pipeline
