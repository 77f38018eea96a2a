#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adx/app/run_config.hpp"
#include "adx/audio/wav.hpp"
#include "adx/core/error.hpp"
#include "adx/core/text.hpp"
#include "adx/data/io.hpp"
#include "adx/data/prepare.hpp"
#include "adx/data/synthetic.hpp"
#include "adx/nn/checkpoint.hpp"
#include "adx/pipeline/evaluate.hpp"
#include "adx/pipeline/finetune.hpp"
#include "adx/pipeline/predict.hpp"
#include "adx/pipeline/pretrain.hpp"

namespace adx::app {

using pipeline::Task;

/// Progress sink; null means quiet.
struct Log {
  std::ostream* out = nullptr;
  template <class T>
  const Log& operator<<(const T& v) const {
    if (out) *out << v;
    return *this;
  }
};

inline void write_json(const fs::path& path, const nlohmann::json& j) { text::write_file(path, j.dump(2) + "\n"); }

/// Audit trail: the fully resolved config next to the artifacts.
inline void write_resolved_config(const RunConfig& c, const fs::path& dir) {
  write_json(dir / "run_config.json", to_json(c));
}

// ------------------------------------------------------------------ data

struct RunData {
  data::Dataset english;
  data::Dataset greek_pool;
  data::Dataset test;
  data::Split split;  // of `english`
};

inline RunData load_run_data(const RunConfig& c, bool with_test) {
  const auto features = data::load_features(c.paths.features_dir);
  RunData d;
  d.english = data::prepare_dataset(data::load_metadata(c.paths.train_metadata), features);
  d.greek_pool = data::prepare_dataset(data::load_metadata(c.paths.greek_metadata), features);
  if (with_test) {
    d.test = data::prepare_dataset(data::load_metadata(c.paths.test_metadata), features,
                                   {.drop_missing_mmse = false, .balance = false});
  }
  d.split = data::split_train_val(d.english, c.train_fraction, c.split_seed);
  return d;
}

/// Reference labels straight from a metadata file; features are not needed.
inline data::Dataset truth_from_metadata(const fs::path& path) {
  data::Dataset ds;
  for (const auto& r : data::load_metadata(path).records) {
    data::Sample s;
    s.id = r.id;
    s.language = r.language;
    s.diagnosis = r.diagnosis;
    s.mmse_raw = r.mmse;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

/// Copies of every dataset in `d` with the AD-probability covariate set from
/// the ensemble `ad_models`.
inline RunData with_ad_probabilities(const RunData& d, std::span<const nn::Checkpoint> ad_models) {
  auto fill = [&](const data::Dataset& ds) {
    if (ds.size() == 0) return ds;
    const auto preds = pipeline::predict_ad(ad_models, ds);
    return pipeline::with_ad_probabilities(ds, pipeline::probability_map(preds));
  };
  RunData out;
  out.english = fill(d.english);
  out.greek_pool = fill(d.greek_pool);
  out.test = fill(d.test);
  out.split.train = fill(d.split.train);
  out.split.val = fill(d.split.val);
  return out;
}

inline pipeline::SampleList sample_list(const data::Dataset& ds) { return ds.samples; }

// ------------------------------------------------------------- training

inline fs::path task_dir(const RunConfig& c, Task task, int rep) {
  auto dir = c.paths.output_dir / std::string(pipeline::to_string(task));
  if (c.repetitions > 1) dir /= "rep_" + std::to_string(rep);
  return dir;
}

/// Repetition 0 uses the configured seeds; later repetitions derive fresh ones.
inline std::vector<std::uint64_t> seeds_for(const RunConfig& c, int rep) {
  if (rep == 0) return c.seeds;
  std::vector<std::uint64_t> out;
  for (auto s : c.seeds) out.push_back(derive_seed(s, 1000 + static_cast<std::uint64_t>(rep)));
  return out;
}

inline optim::TrainConfig train_for(const RunConfig& c, int rep) {
  auto t = c.train;
  t.seed = rep == 0 ? t.seed : derive_seed(t.seed, 1000 + static_cast<std::uint64_t>(rep));
  return t;
}

/// Five-seed pre-training on the English training split, validated on the
/// Greek pool. Writes per-seed logs and checkpoints plus the selection.
inline pipeline::RunArtifacts pretrain_stage(const RunConfig& c, Task task, const RunData& d, int rep, const Log& log) {
  const auto dir = task_dir(c, task, rep);
  const auto seeds = seeds_for(c, rep);
  log << "[" << pipeline::to_string(task) << "] pre-training " << seeds.size() << " seeds on "
      << d.split.train.size() << " samples\n";
  auto art = pipeline::pretrain(d.split.train, d.greek_pool, task, c.model_config(task), train_for(c, rep), seeds,
                                c.parallel_seeds);
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : art.runs) {
    const auto stem = dir / "pretrain" / ("seed_" + std::to_string(r.seed));
    text::write_file(fs::path(stem).concat(".log"), pipeline::format_run_log(r.curve));
    if (r.best) nn::save_checkpoint(*r.best, fs::path(stem).concat(".json"));
    runs.push_back({{"seed", r.seed},
                    {"failed", !r.best.has_value()},
                    {"failure", r.failure},
                    {"best_epoch", r.best ? r.best->epoch : 0},
                    {"best_val_loss", r.best ? nlohmann::json(r.best->val_loss) : nlohmann::json(nullptr)}});
  }
  nn::save_checkpoint(art.selected, dir / "pretrained.json");
  write_json(dir / "pretrain_summary.json",
             {{"selected_seed", art.selected.seed}, {"rationale", art.rationale}, {"runs", std::move(runs)}});
  log << "  " << art.rationale << "\n";
  return art;
}

inline pipeline::FinetuneResult finetune_stage(const RunConfig& c, Task task, const RunData& d,
                                               const nn::Checkpoint& pretrained, bool swapped, int rep, const Log& log) {
  const auto [a, b] = pipeline::partition_greek(sample_list(d.greek_pool));
  const auto& gr_train = swapped ? b : a;
  const auto& gr_val = swapped ? a : b;
  auto r = pipeline::finetune(pretrained, d.split.train, d.split.val, gr_train, gr_val, task, train_for(c, rep));
  const auto dir = task_dir(c, task, rep);
  const std::string name = swapped ? "finetune_b" : "finetune_a";
  nn::save_checkpoint(r.checkpoint, dir / (name + ".json"));
  text::write_file(dir / (name + ".log"), pipeline::format_run_log(r.curve));
  log << "[" << pipeline::to_string(task) << "] " << name << " best epoch " << r.checkpoint.epoch << " val loss "
      << text::format_double(r.checkpoint.val_loss) << "\n";
  return r;
}

/// Both fine-tuning passes with swapped Greek halves, then the average.
inline pipeline::SwapAverageResult average_stage(const RunConfig& c, Task task, const RunData& d,
                                                 const nn::Checkpoint& pretrained, int rep, const Log& log) {
  const auto dir = task_dir(c, task, rep);
  auto r = pipeline::swap_and_average(pretrained, d.split.train, d.split.val, sample_list(d.greek_pool), task,
                                      train_for(c, rep));
  for (const auto& [name, ft] : {std::pair{"finetune_a", &r.first}, std::pair{"finetune_b", &r.second}}) {
    nn::save_checkpoint(ft->checkpoint, dir / (std::string(name) + ".json"));
    text::write_file(dir / (std::string(name) + ".log"), pipeline::format_run_log(ft->curve));
  }
  nn::save_checkpoint(r.averaged, dir / "averaged.json");
  log << "[" << pipeline::to_string(task) << "] averaged fine-tuned models (val losses "
      << text::format_double(r.first.checkpoint.val_loss) << ", " << text::format_double(r.second.checkpoint.val_loss)
      << ")\n";
  return r;
}

// ----------------------------------------------------------- predictions

/// `id,ad_probability,ad_label,mmse`; mmse is empty when not predicted.
inline std::string format_predictions(std::span<const pipeline::AdPrediction> ad,
                                      std::span<const pipeline::MmsePrediction> mmse) {
  std::map<std::string, double> scores;
  for (const auto& m : mmse) scores[m.id] = m.score;
  std::string out = "id,ad_probability,ad_label,mmse\n";
  for (const auto& p : ad) {
    out += p.id + "," + text::format_double(p.probability) + "," + std::string(data::to_string(p.label)) + ",";
    if (auto it = scores.find(p.id); it != scores.end()) out += text::format_double(it->second);
    out += "\n";
  }
  return out;
}

struct PredictionTable {
  std::vector<pipeline::AdPrediction> ad;
  std::vector<pipeline::MmsePrediction> mmse;
};

inline PredictionTable parse_predictions(std::string_view contents, const std::string& source) {
  std::istringstream in{std::string(contents)};
  std::string line;
  if (!std::getline(in, line) || text::split_csv_line(line) != std::vector<std::string>{"id", "ad_probability", "ad_label", "mmse"}) {
    throw DataError(source + ": header must be id,ad_probability,ad_label,mmse");
  }
  PredictionTable t;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    ++row;
    const auto cells = text::split_csv_line(line);
    const auto where = source + " row " + std::to_string(row);
    if (cells.size() != 4) throw DataError(where + ": expected 4 cells");
    const auto prob = text::parse_double(cells[1]);
    if (!prob || !(*prob >= 0.0 && *prob <= 1.0)) throw DataError(where + ": ad_probability must be in [0,1]");
    pipeline::AdPrediction p{cells[0], *prob, data::Diagnosis::control};
    const auto label = text::lower(cells[2]);
    if (label == "ad") {
      p.label = data::Diagnosis::ad;
    } else if (label != "control") {
      throw DataError(where + ": ad_label must be ad or control");
    }
    t.ad.push_back(p);
    if (!cells[3].empty()) {
      const auto score = text::parse_double(cells[3]);
      if (!score || !std::isfinite(*score)) throw DataError(where + ": mmse is not a number");
      t.mmse.push_back({cells[0], *score});
    }
  }
  return t;
}

// ---------------------------------------------------------------- run-all

struct RunAllSummary {
  pipeline::EvalReport report;
  pipeline::EvalReport pretrained_report;  // AD only, unadapted pre-trained models
  std::vector<pipeline::AdPrediction> ad;
  std::vector<pipeline::MmsePrediction> mmse;
};

/// The full procedure for both tasks: pre-train, swap-and-average, predict
/// the Greek test split, evaluate. With repetitions > 1 the AD probabilities
/// of the repeated models are averaged.
inline RunAllSummary run_all(const RunConfig& c, const Log& log = {}) {
  validate(c, {.training_data = true, .test_data = true, .five_seeds = true});
  write_resolved_config(c, c.paths.output_dir);
  const auto d = load_run_data(c, true);
  log << "data: " << d.split.train.size() << " train / " << d.split.val.size() << " val English, "
      << d.greek_pool.size() << " Greek pool, " << d.test.size() << " test\n";

  std::vector<nn::Checkpoint> ad_models, ad_pretrained;
  for (int rep = 0; rep < c.repetitions; ++rep) {
    const auto art = pretrain_stage(c, Task::ad, d, rep, log);
    ad_pretrained.push_back(art.selected);
    ad_models.push_back(average_stage(c, Task::ad, d, art.selected, rep, log).averaged);
  }

  const auto dm = with_ad_probabilities(d, ad_models);
  std::vector<nn::Checkpoint> mmse_models;
  for (int rep = 0; rep < c.repetitions; ++rep) {
    const auto art = pretrain_stage(c, Task::mmse, dm, rep, log);
    mmse_models.push_back(average_stage(c, Task::mmse, dm, art.selected, rep, log).averaged);
  }

  RunAllSummary s;
  s.ad = pipeline::predict_ad(ad_models, d.test);
  const auto probs = pipeline::probability_map(s.ad);
  std::vector<std::vector<pipeline::MmsePrediction>> per_model;
  for (const auto& m : mmse_models) per_model.push_back(pipeline::predict_mmse(m, d.test, probs));
  s.mmse = per_model.front();
  for (std::size_t i = 0; i < s.mmse.size(); ++i) {
    std::vector<double> scores;
    for (const auto& pm : per_model) scores.push_back(pm[i].score);
    s.mmse[i].score = pipeline::ensemble_mean(scores);
  }
  s.report = pipeline::evaluate(s.ad, d.test, s.mmse);
  s.pretrained_report = pipeline::evaluate(pipeline::predict_ad(ad_pretrained, d.test), d.test);

  text::write_file(c.paths.output_dir / "predictions.csv", format_predictions(s.ad, s.mmse));
  write_json(c.paths.output_dir / "report.json", pipeline::report_to_json(s.report));
  text::write_file(c.paths.output_dir / "report.txt", pipeline::format_report(s.report));
  write_json(c.paths.output_dir / "pretrained_report.json", pipeline::report_to_json(s.pretrained_report));
  return s;
}

// ---------------------------------------------------------- synthetic suite

/// A challenge-shaped synthetic corpus: English training split, a balanced
/// Greek pool and a Greek test split whose acoustic channels carry a
/// constant language offset.
struct SuiteConfig {
  std::size_t english_per_class = 200;
  std::size_t greek_pool_per_class = 4;
  std::size_t greek_test_per_class = 23;
  double language_shift = 1.5;
  double class_shift = 1.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
};

struct Suite {
  data::Dataset english, greek_pool, greek_test;
};

inline Suite make_suite(const SuiteConfig& s) {
  auto base = [&](std::size_t n, data::Language lang, double shift, std::uint64_t stream, const char* prefix) {
    data::SynthConfig c;
    c.n_per_class = n;
    c.language = lang;
    c.language_shift = shift;
    c.class_shift = s.class_shift;
    c.noise = s.noise;
    c.seed = derive_seed(s.seed, stream);
    c.id_prefix = prefix;
    return data::make_synthetic(c);
  };
  return {base(s.english_per_class, data::Language::english, 0.0, 10, "EN"),
          base(s.greek_pool_per_class, data::Language::greek, s.language_shift, 11, "GS"),
          base(s.greek_test_per_class, data::Language::greek, s.language_shift, 12, "GT")};
}

inline void write_dataset_files(const data::Dataset& ds, const fs::path& metadata, const fs::path& features_dir) {
  text::write_file(metadata, data::format_metadata(data::to_records(ds)));
  for (const auto& s : ds.samples) {
    text::write_file(features_dir / (s.id + ".csv"), data::format_feature_csv(s.features));
  }
}

/// Writes the suite and a run config that points at it.
inline RunConfig write_suite(const Suite& suite, const fs::path& dir) {
  write_dataset_files(suite.english, dir / "english.csv", dir / "features");
  write_dataset_files(suite.greek_pool, dir / "greek_sample.csv", dir / "features");
  write_dataset_files(suite.greek_test, dir / "greek_test.csv", dir / "features");
  RunConfig c;
  c.paths = {"english.csv", "greek_sample.csv", "greek_test.csv", "features", "out"};
  write_json(dir / "run_config.json", to_json(c));
  c.paths = {dir / "english.csv", dir / "greek_sample.csv", dir / "greek_test.csv", dir / "features", dir / "out"};
  return c;
}

// ---------------------------------------------------------------- segment

/// Splits every clip into ten WAV files under `<out>/<id>/seg_<i>.wav`.
inline void segment_file(const fs::path& wav, const std::string& id, const fs::path& out_dir) {
  const auto parts = audio::split_ten(audio::read_wav(wav));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    audio::write_wav(parts[i], out_dir / id / ("seg_" + std::to_string(i) + ".wav"));
  }
}

}  // namespace adx::app
