#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "adx/core/error.hpp"
#include "adx/core/text.hpp"
#include "adx/data/sample.hpp"
#include "adx/pipeline/predict.hpp"

namespace adx::pipeline {

/// Confusion counts with AD as the positive class. A ratio whose
/// denominator is zero is left empty.
struct EvalReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> accuracy, specificity, precision, sensitivity, f1;
  std::optional<double> rmse_mmse;

  std::size_t n() const { return tp + fp + tn + fn; }
};

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline EvalReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.tn = tn;
  r.fn = fn;
  r.accuracy = ratio(tp + tn, r.n());
  r.sensitivity = ratio(tp, tp + fn);
  r.specificity = ratio(tn, tn + fp);
  r.precision = ratio(tp, tp + fp);
  if (r.precision && r.sensitivity) r.f1 = ratio(2 * tp, 2 * tp + fp + fn);
  return r;
}

inline double rmse(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size() || predicted.empty()) {
    throw DataError("rmse needs two equally long, non-empty score lists");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(predicted.size()));
}

/// Scores AD predictions (and optionally MMSE predictions) against the
/// labels in `truth`, matched by id.
inline EvalReport evaluate(std::span<const AdPrediction> ad, const data::Dataset& truth,
                           std::span<const MmsePrediction> mmse = {}) {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& p : ad) {
    const auto* s = truth.find(p.id);
    if (!s) throw DataError("prediction for unknown id '" + p.id + "'");
    if (!s->diagnosis) throw DataError("no diagnosis for '" + p.id + "' in the reference data");
    const bool predicted_ad = p.label == data::Diagnosis::ad;
    if (s->is_ad()) {
      (predicted_ad ? tp : fn) += 1;
    } else {
      (predicted_ad ? fp : tn) += 1;
    }
  }
  auto report = report_from_counts(tp, fp, tn, fn);
  if (!mmse.empty()) {
    std::vector<double> pred, ref;
    for (const auto& m : mmse) {
      const auto* s = truth.find(m.id);
      if (!s) throw DataError("MMSE prediction for unknown id '" + m.id + "'");
      if (!s->mmse_raw) throw DataError("no MMSE score for '" + m.id + "' in the reference data");
      pred.push_back(m.score);
      ref.push_back(static_cast<double>(*s->mmse_raw));
    }
    report.rmse_mmse = rmse(pred, ref);
  }
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"n", r.n()},
          {"tp", r.tp},
          {"fp", r.fp},
          {"tn", r.tn},
          {"fn", r.fn},
          {"accuracy", opt(r.accuracy)},
          {"specificity", opt(r.specificity)},
          {"precision", opt(r.precision)},
          {"sensitivity", opt(r.sensitivity)},
          {"f1", opt(r.f1)},
          {"rmse_mmse", opt(r.rmse_mmse)}};
}

/// Human-readable summary, one metric per line.
inline std::string format_report(const EvalReport& r) {
  auto pct = [](const std::optional<double>& v) { return v ? text::format_fixed(100.0 * *v, 1) + "%" : std::string("n/a"); };
  std::string out = "n " + std::to_string(r.n()) + " (tp " + std::to_string(r.tp) + ", fp " + std::to_string(r.fp) +
                    ", tn " + std::to_string(r.tn) + ", fn " + std::to_string(r.fn) + ")\n";
  out += "accuracy " + pct(r.accuracy) + "\n";
  out += "specificity " + pct(r.specificity) + "\n";
  out += "precision " + pct(r.precision) + "\n";
  out += "sensitivity " + pct(r.sensitivity) + "\n";
  out += "f1 " + pct(r.f1) + "\n";
  if (r.rmse_mmse) out += "rmse_mmse " + text::format_fixed(*r.rmse_mmse, 3) + "\n";
  return out;
}

}  // namespace adx::pipeline
