#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adx/core/error.hpp"

namespace adx::data {

inline constexpr std::size_t kSegments = 10;
inline constexpr std::size_t kFunctionals = 25;
inline constexpr double kDefaultEducationYears = 12.0;

enum class Language { english, greek };
enum class Diagnosis { control, ad };

inline std::string_view to_string(Language l) { return l == Language::english ? "en" : "gr"; }
inline std::string_view to_string(Diagnosis d) { return d == Diagnosis::ad ? "ad" : "control"; }

/// Ten segments of 25 acoustic functionals, segment-major.
class FeatureSequence {
 public:
  using Row = std::array<double, kFunctionals>;

  FeatureSequence() { for (auto& r : rows_) r.fill(0.0); }

  explicit FeatureSequence(const std::array<Row, kSegments>& rows) : rows_(rows) {
    for (std::size_t s = 0; s < kSegments; ++s) {
      for (std::size_t f = 0; f < kFunctionals; ++f) {
        if (!std::isfinite(rows_[s][f])) {
          throw DataError("feature value at segment " + std::to_string(s) + ", column f" +
                          std::to_string(f) + " is not finite");
        }
      }
    }
  }

  double operator()(std::size_t segment, std::size_t column) const { return rows_[segment][column]; }
  const Row& row(std::size_t segment) const { return rows_[segment]; }

  bool operator==(const FeatureSequence&) const = default;

 private:
  std::array<Row, kSegments> rows_;
};

struct Covariates {
  double age = 0.0;
  int gender = 0;  // 0 male, 1 female
  double education = kDefaultEducationYears;
  std::optional<double> ad_probability;  // only for the MMSE model

  bool operator==(const Covariates&) const = default;
};

struct Sample {
  std::string id;
  Language language = Language::english;
  FeatureSequence features;
  Covariates covariates;
  std::optional<Diagnosis> diagnosis;
  std::optional<int> mmse_raw;
  std::optional<double> mmse_normalized;

  bool is_ad() const { return diagnosis == Diagnosis::ad; }

  bool operator==(const Sample&) const = default;
};

struct Provenance {
  std::string digest;
  std::vector<std::string> log;

  bool operator==(const Provenance&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;
  Provenance provenance;

  std::size_t size() const noexcept { return samples.size(); }

  std::size_t count(Diagnosis d) const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.diagnosis == d ? 1 : 0;
    return n;
  }

  const Sample* find(std::string_view id) const {
    for (const auto& s : samples) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }

  bool operator==(const Dataset&) const = default;
};

inline double normalize_mmse(int raw) {
  if (raw < 0 || raw > 30) throw DataError("MMSE score " + std::to_string(raw) + " outside [0,30]");
  return static_cast<double>(raw) / 30.0;
}

inline double denormalize_mmse(double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DataError("normalized MMSE " + std::to_string(x) + " outside [0,1]");
  return x * 30.0;
}

}  // namespace adx::data
