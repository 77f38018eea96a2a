// Command-line entry point: segment, ingest, synth, pretrain, finetune,
// average, predict, evaluate, run-all.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adx/app/commands.hpp"

namespace fs = std::filesystem;
using namespace adx;

namespace {

struct Overrides {
  std::string config;
  std::string output;
  std::string task;
  std::optional<int> epochs;
  std::vector<std::uint64_t> seeds;
  bool parallel_seeds = false;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "run config (JSON)")->required();
  cmd->add_option("-o,--output", o.output, "output directory (overrides paths.output_dir)");
  cmd->add_option("--task", o.task, "ad or mmse");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--seeds", o.seeds, "pre-training seeds")->delimiter(',');
  cmd->add_flag("--parallel-seeds", o.parallel_seeds, "pre-train the seeds concurrently");
}

app::RunConfig resolve(const Overrides& o) {
  auto c = app::load_run_config(o.config);
  if (!o.output.empty()) c.paths.output_dir = o.output;
  if (!o.task.empty()) c.task = app::parse_task(o.task);
  if (o.epochs) c.train.epochs = *o.epochs;
  if (!o.seeds.empty()) c.seeds = o.seeds;
  if (o.parallel_seeds) c.parallel_seeds = true;
  return c;
}

std::vector<nn::Checkpoint> load_all(const std::vector<fs::path>& paths) {
  std::vector<nn::Checkpoint> out;
  for (const auto& p : paths) out.push_back(nn::load_checkpoint(p));
  return out;
}

/// MMSE stages need the AD covariate; it comes from `ad_checkpoints`, or
/// from the AD model averaged earlier in the same output directory.
app::RunData prepare_for_task(const app::RunConfig& c, app::RunData d) {
  if (c.task == pipeline::Task::ad) return d;
  auto paths = c.ad_checkpoints;
  if (paths.empty()) paths.push_back(app::task_dir(c, pipeline::Task::ad, 0) / "averaged.json");
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ConfigError("MMSE task needs AD checkpoints; not found: " + p.string());
  }
  return app::with_ad_probabilities(d, load_all(paths));
}

int fail(const Error& e, const CLI::App& cli) {
  std::cerr << "error kind=" << to_string(e.kind()) << " code=" << exit_code(e.kind()) << " message=\"" << e.what()
            << "\"\n";
  if (e.kind() == ErrorKind::config) std::cerr << cli.help();
  return exit_code(e.kind());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Cross-lingual AD detection: training, transfer and evaluation"};
  cli.require_subcommand(1);
  bool quiet = false;
  cli.add_flag("-q,--quiet", quiet, "no progress output");

  // segment
  auto* segment = cli.add_subcommand("segment", "split WAV recordings into ten equal segments");
  std::string seg_input, seg_out, seg_id;
  segment->add_option("input", seg_input, "WAV file or directory of WAV files")->required();
  segment->add_option("-o,--output", seg_out, "output directory")->required();
  segment->add_option("--id", seg_id, "recording id (single file; defaults to the file stem)");

  // ingest
  auto* ingest = cli.add_subcommand("ingest", "validate and prepare the three metadata splits");
  Overrides ingest_o;
  add_config_options(ingest, ingest_o);

  // synth
  auto* synth = cli.add_subcommand("synth", "generate a synthetic dataset");
  std::uint64_t synth_seed = 0;
  std::size_t synth_n = 200;
  std::string synth_out, synth_lang = "en", synth_prefix = "S";
  double synth_lang_shift = 0.0, synth_class_shift = 1.0, synth_noise = 1.0;
  bool synth_suite = false;
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--n", synth_n, "samples per class (English split with --suite)");
  synth->add_option("-o,--output", synth_out, "output directory")->required();
  synth->add_option("--language", synth_lang, "en or gr");
  synth->add_option("--language-shift", synth_lang_shift, "offset added to every acoustic channel");
  synth->add_option("--class-shift", synth_class_shift, "offset on the signal channels of AD samples");
  synth->add_option("--noise", synth_noise, "feature noise standard deviation");
  synth->add_option("--prefix", synth_prefix, "id prefix");
  synth->add_flag("--suite", synth_suite, "write English, Greek pool and Greek test splits plus a run config");

  auto* pretrain = cli.add_subcommand("pretrain", "five-seed pre-training on English");
  Overrides pretrain_o;
  add_config_options(pretrain, pretrain_o);

  auto* finetune = cli.add_subcommand("finetune", "mixed-batch fine-tuning of the pre-trained model");
  Overrides finetune_o;
  std::string finetune_ckpt;
  bool finetune_swap = false;
  add_config_options(finetune, finetune_o);
  finetune->add_option("--checkpoint", finetune_ckpt, "pre-trained checkpoint (default: <output>/<task>/pretrained.json)");
  finetune->add_flag("--swap", finetune_swap, "train on the second Greek half, validate on the first");

  auto* average = cli.add_subcommand("average", "swap fine-tuning and parameter averaging");
  Overrides average_o;
  std::string average_ckpt, average_out;
  std::vector<std::string> average_inputs;
  add_config_options(average, average_o);
  average->add_option("--checkpoint", average_ckpt, "pre-trained checkpoint (default: <output>/<task>/pretrained.json)");
  average->add_option("--inputs", average_inputs, "average two existing checkpoints instead of fine-tuning")->expected(2);
  average->add_option("--to", average_out, "destination for --inputs");

  auto* predict = cli.add_subcommand("predict", "predict the test split");
  Overrides predict_o;
  std::vector<std::string> predict_models;
  std::string predict_mmse_model, predict_out, predict_metadata;
  add_config_options(predict, predict_o);
  predict->add_option("--models", predict_models, "AD checkpoints to ensemble (default: <output>/ad/averaged.json)");
  predict->add_option("--mmse-model", predict_mmse_model, "MMSE checkpoint (default: <output>/mmse/averaged.json if present)");
  predict->add_option("--metadata", predict_metadata, "metadata to predict (default: paths.test_metadata)");
  predict->add_option("--to", predict_out, "predictions CSV (default: <output>/predictions.csv)");

  auto* evaluate = cli.add_subcommand("evaluate", "score predictions against reference labels");
  std::string eval_pred, eval_truth, eval_out;
  evaluate->add_option("--predictions", eval_pred, "predictions CSV")->required();
  evaluate->add_option("--truth", eval_truth, "reference metadata CSV")->required();
  evaluate->add_option("-o,--output", eval_out, "directory for report.json");

  auto* run_all = cli.add_subcommand("run-all", "full procedure for both tasks");
  Overrides run_all_o;
  add_config_options(run_all, run_all_o);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return cli.exit(e);
    std::cerr << "error kind=config code=2 message=\"" << e.what() << "\"\n" << cli.help();
    return 2;
  }

  const app::Log log{quiet ? nullptr : &std::cerr};
  try {
    if (*segment) {
      const fs::path in(seg_input);
      if (fs::is_directory(in)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(in)) {
          if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) app::segment_file(f, f.stem().string(), seg_out);
        log << "segmented " << files.size() << " recordings into " << seg_out << "\n";
      } else {
        app::segment_file(in, seg_id.empty() ? in.stem().string() : seg_id, seg_out);
      }
      return 0;
    }

    if (*synth) {
      if (synth_suite) {
        app::SuiteConfig sc;
        sc.english_per_class = synth_n;
        sc.seed = synth_seed;
        sc.class_shift = synth_class_shift;
        sc.noise = synth_noise;
        if (synth->count("--language-shift")) sc.language_shift = synth_lang_shift;
        app::write_suite(app::make_suite(sc), synth_out);
      } else {
        data::SynthConfig sc;
        sc.n_per_class = synth_n;
        sc.seed = synth_seed;
        sc.language_shift = synth_lang_shift;
        sc.class_shift = synth_class_shift;
        sc.noise = synth_noise;
        sc.id_prefix = synth_prefix;
        if (synth_lang == "gr" || synth_lang == "greek") {
          sc.language = data::Language::greek;
        } else if (synth_lang != "en" && synth_lang != "english") {
          throw ConfigError("unknown language '" + synth_lang + "'");
        }
        const fs::path out(synth_out);
        app::write_dataset_files(data::make_synthetic(sc), out / "metadata.csv", out / "features");
      }
      return 0;
    }

    if (*evaluate) {
      const auto preds = app::parse_predictions(text::read_file(eval_pred), eval_pred);
      const auto truth = app::truth_from_metadata(eval_truth);
      const auto report = pipeline::evaluate(preds.ad, truth, preds.mmse);
      if (!eval_out.empty()) app::write_json(fs::path(eval_out) / "report.json", pipeline::report_to_json(report));
      std::cout << pipeline::format_report(report);
      return 0;
    }

    if (*ingest) {
      auto c = resolve(ingest_o);
      app::validate(c, {.training_data = true, .test_data = true});
      const auto d = app::load_run_data(c, true);
      const auto dir = c.paths.output_dir / "ingest";
      nlohmann::json summary;
      for (const auto& [name, ds] : {std::pair{"english", &d.english}, std::pair{"greek_sample", &d.greek_pool},
                                     std::pair{"greek_test", &d.test}}) {
        summary[name] = {{"n", ds->size()},
                         {"n_ad", ds->count(data::Diagnosis::ad)},
                         {"digest", ds->provenance.digest},
                         {"log", ds->provenance.log}};
        std::vector<data::MetadataRecord> prepared;
        for (const auto& r : data::to_records(*ds)) prepared.push_back(r);
        text::write_file(dir / (std::string(name) + "_prepared.csv"), data::format_metadata(prepared));
      }
      summary["split"] = {{"train", d.split.train.size()}, {"val", d.split.val.size()}};
      app::write_json(dir / "summary.json", summary);
      app::write_resolved_config(c, dir);
      std::cout << summary.dump(2) << "\n";
      return 0;
    }

    if (*pretrain) {
      auto c = resolve(pretrain_o);
      app::validate(c, {.training_data = true, .five_seeds = true});
      const auto d = prepare_for_task(c, app::load_run_data(c, false));
      app::pretrain_stage(c, c.task, d, 0, log);
      app::write_resolved_config(c, app::task_dir(c, c.task, 0));
      return 0;
    }

    if (*finetune) {
      auto c = resolve(finetune_o);
      app::validate(c, {.training_data = true});
      const auto d = prepare_for_task(c, app::load_run_data(c, false));
      const fs::path ck = finetune_ckpt.empty() ? app::task_dir(c, c.task, 0) / "pretrained.json" : fs::path(finetune_ckpt);
      app::finetune_stage(c, c.task, d, nn::load_checkpoint(ck), finetune_swap, 0, log);
      app::write_resolved_config(c, app::task_dir(c, c.task, 0));
      return 0;
    }

    if (*average) {
      auto c = resolve(average_o);
      if (!average_inputs.empty()) {
        const auto a = nn::load_checkpoint(average_inputs[0]);
        const auto b = nn::load_checkpoint(average_inputs[1]);
        if (!(a.config == b.config)) throw ConfigError("checkpoints have different model configurations");
        nn::Checkpoint out{a.config, pipeline::average_params(a.params, b.params), a.seed, 0,
                           0.5 * (a.val_loss + b.val_loss)};
        const fs::path dst = average_out.empty() ? app::task_dir(c, c.task, 0) / "averaged.json" : fs::path(average_out);
        nn::save_checkpoint(out, dst);
        app::write_resolved_config(c, dst.parent_path());
        return 0;
      }
      app::validate(c, {.training_data = true});
      const auto d = prepare_for_task(c, app::load_run_data(c, false));
      const fs::path ck = average_ckpt.empty() ? app::task_dir(c, c.task, 0) / "pretrained.json" : fs::path(average_ckpt);
      app::average_stage(c, c.task, d, nn::load_checkpoint(ck), 0, log);
      app::write_resolved_config(c, app::task_dir(c, c.task, 0));
      return 0;
    }

    if (*predict) {
      auto c = resolve(predict_o);
      const fs::path metadata = predict_metadata.empty() ? c.paths.test_metadata : fs::path(predict_metadata);
      if (metadata.empty() || !fs::exists(metadata)) throw ConfigError("metadata to predict not found: " + metadata.string());
      app::validate(c, {});
      const auto ds = data::prepare_dataset(data::load_metadata(metadata), data::load_features(c.paths.features_dir),
                                            {.drop_missing_mmse = false, .balance = false});
      std::vector<fs::path> model_paths(predict_models.begin(), predict_models.end());
      if (model_paths.empty()) model_paths.push_back(app::task_dir(c, pipeline::Task::ad, 0) / "averaged.json");
      const auto ad = pipeline::predict_ad(load_all(model_paths), ds);
      std::vector<pipeline::MmsePrediction> mmse;
      fs::path mmse_path = predict_mmse_model;
      if (mmse_path.empty() && fs::exists(app::task_dir(c, pipeline::Task::mmse, 0) / "averaged.json")) {
        mmse_path = app::task_dir(c, pipeline::Task::mmse, 0) / "averaged.json";
      }
      if (!mmse_path.empty()) mmse = pipeline::predict_mmse(nn::load_checkpoint(mmse_path), ds, pipeline::probability_map(ad));
      const fs::path out = predict_out.empty() ? c.paths.output_dir / "predictions.csv" : fs::path(predict_out);
      text::write_file(out, app::format_predictions(ad, mmse));
      app::write_resolved_config(c, out.parent_path());
      log << "wrote " << ad.size() << " predictions to " << out.string() << "\n";
      return 0;
    }

    if (*run_all) {
      auto c = resolve(run_all_o);
      const auto s = app::run_all(c, log);
      std::cout << pipeline::format_report(s.report);
      return 0;
    }
  } catch (const Error& e) {
    return fail(e, cli);
  } catch (const std::exception& e) {
    std::cerr << "error kind=internal code=1 message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
