#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "adx/data/prepare.hpp"
#include "adx/data/synthetic.hpp"
#include "adx/pipeline/evaluate.hpp"
#include "adx/pipeline/finetune.hpp"
#include "adx/pipeline/mixed_batches.hpp"
#include "adx/pipeline/predict.hpp"
#include "adx/pipeline/pretrain.hpp"
#include "oracles.hpp"

using namespace adx;
using namespace adx::pipeline;
using data::Diagnosis;
using data::Language;

namespace {

std::vector<data::Sample> make_samples(std::size_t n, const std::string& prefix) {
  std::vector<data::Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].id = prefix + std::to_string(i);
    out[i].diagnosis = i % 2 ? Diagnosis::ad : Diagnosis::control;
  }
  return out;
}

std::vector<const data::Sample*> ptrs(const std::vector<data::Sample>& v) {
  std::vector<const data::Sample*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

optim::TrainConfig quick_config(int epochs = 12) {
  optim::TrainConfig c;
  c.epochs = epochs;
  c.warmup_steps = 10;
  c.base_lr = 1e-2;
  return c;
}

/// English, Greek pool and Greek test drawn from one generator family.
struct World {
  data::Split english;
  std::vector<data::Sample> greek_pool;
  data::Dataset greek_test;
};

World make_world(std::uint64_t seed) {
  World w;
  const auto en = data::make_synthetic({.n_per_class = 60, .class_shift = 1.0, .seed = seed, .id_prefix = "EN"});
  w.english = data::split_train_val(en, 0.8, seed);
  w.greek_pool = data::make_synthetic({.n_per_class = 4, .language = Language::greek, .language_shift = 1.5,
                                       .class_shift = 1.0, .seed = seed + 100, .id_prefix = "GS"})
                     .samples;
  w.greek_test = data::make_synthetic({.n_per_class = 23, .language = Language::greek, .language_shift = 1.5,
                                       .class_shift = 1.0, .seed = seed + 200, .id_prefix = "GT"});
  return w;
}

nn::Checkpoint constant_ad_model(double logit_ad) {
  const auto c = nn::ModelConfig::ad_detection();
  auto p = nn::init_params(c, 0);
  p.out_weight.fill(0.0);
  p.out_bias[0] = 0.0;
  p.out_bias[1] = logit_ad;
  return {c, p, 0, 0, 0.0};
}

data::Dataset labelled(const std::vector<std::pair<Diagnosis, int>>& rows) {
  data::Dataset ds;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data::Sample s;
    s.id = "S" + std::to_string(i);
    s.diagnosis = rows[i].first;
    s.mmse_raw = rows[i].second;
    ds.samples.push_back(s);
  }
  return ds;
}

}  // namespace

// ------------------------------------------------------------ mixed batches

TEST(MixedBatches, Size32HoldsSixGreekAtPinnedPositions) {
  const auto english = make_samples(200, "E"), greek = make_samples(4, "G");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (int epoch = 0; epoch < 5; ++epoch) {
      const auto batches = mixed_batches(ptrs(english), ptrs(greek), 32, seed, epoch);
      for (std::size_t b = 0; b < batches.size(); ++b) {
        std::set<std::size_t> greek_positions;
        for (std::size_t p = 0; p < batches[b].size(); ++p) {
          if (batches[b][p]->id[0] == 'G') greek_positions.insert(p);
        }
        if (batches[b].size() == 32) {
          EXPECT_EQ(greek_positions, (std::set<std::size_t>{4, 9, 14, 19, 24, 29}));
        }
        EXPECT_EQ(greek_positions.size(), batches[b].size() / 5);
        for (auto p : greek_positions) EXPECT_EQ(p % 5, 4u);
      }
    }
  }
}

TEST(MixedBatches, EveryEnglishSampleAppearsExactlyOnce) {
  for (std::size_t n : {1u, 7u, 26u, 100u, 183u}) {
    const auto english = make_samples(n, "E"), greek = make_samples(3, "G");
    const auto batches = mixed_batches(ptrs(english), ptrs(greek), 32, 9, 2);
    std::multiset<std::string> seen;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      if (b + 1 < batches.size()) EXPECT_EQ(batches[b].size(), 32u);
      for (const auto* s : batches[b]) {
        if (s->id[0] == 'E') seen.insert(s->id);
      }
    }
    EXPECT_EQ(seen.size(), n);
    EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), n);
  }
}

TEST(MixedBatches, SingleGreekSampleFillsPositionFour) {
  const auto english = make_samples(40, "E"), greek = make_samples(1, "G");
  for (const auto& batch : mixed_batches(ptrs(english), ptrs(greek), 5, 1, 0)) {
    ASSERT_EQ(batch.size(), 5u);
    EXPECT_EQ(batch[4], &greek[0]);
    for (std::size_t p = 0; p < 4; ++p) EXPECT_EQ(batch[p]->id[0], 'E');
  }
}

TEST(MixedBatches, GreekSamplesCycleRoundRobinAcrossBatches) {
  const auto english = make_samples(130, "E"), greek = make_samples(4, "G");
  const auto batches = mixed_batches(ptrs(english), ptrs(greek), 32, 3, 1);
  std::vector<const data::Sample*> sequence;
  for (const auto& b : batches) {
    for (const auto* s : b) {
      if (s->id[0] == 'G') sequence.push_back(s);
    }
  }
  // first batch: g0 g1 g2 g3 g0 g1, second batch continues with g2
  ASSERT_GE(sequence.size(), 12u);
  EXPECT_EQ(std::set<const data::Sample*>(sequence.begin(), sequence.begin() + 4).size(), 4u);
  for (std::size_t i = 4; i < sequence.size(); ++i) EXPECT_EQ(sequence[i], sequence[i - 4]);
  EXPECT_EQ(batches[1][4], sequence[6]);
  EXPECT_EQ(sequence[6], sequence[2]);
}

TEST(MixedBatches, SeededPerEpoch) {
  const auto english = make_samples(64, "E"), greek = make_samples(4, "G");
  EXPECT_EQ(mixed_batches(ptrs(english), ptrs(greek), 32, 1, 3), mixed_batches(ptrs(english), ptrs(greek), 32, 1, 3));
  EXPECT_NE(mixed_batches(ptrs(english), ptrs(greek), 32, 1, 3), mixed_batches(ptrs(english), ptrs(greek), 32, 1, 4));
}

TEST(MixedBatches, InvalidConfigurations) {
  const auto english = make_samples(10, "E"), greek = make_samples(1, "G");
  EXPECT_THROW(mixed_batches(ptrs(english), ptrs(greek), 4, 0, 0), ConfigError);
  EXPECT_THROW(mixed_batches(ptrs(english), {}, 32, 0, 0), ConfigError);
}

// ---------------------------------------------------------------- pretrain

TEST(Pretrain, SelectsArgminOfRunBests) {
  const std::vector<std::optional<double>> losses{0.71, 0.64, 0.69, 0.73, 0.66};
  EXPECT_EQ(select_best_run(losses), 1u);
  const std::vector<std::optional<double>> with_failure{std::nullopt, 0.9, 0.9};
  EXPECT_EQ(select_best_run(with_failure), 1u);
  const std::vector<std::optional<double>> none{std::nullopt, std::nullopt};
  EXPECT_THROW(select_best_run(none), NumericalError);
}

TEST(Pretrain, DeterministicAndSeparable) {
  const auto w = make_world(1);
  ASSERT_GE(oracle::logistic_regression_accuracy(w.english.val.samples), 0.95);
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto mc = nn::ModelConfig::ad_detection();
  const auto a = pretrain(w.english.train, w.english.val, Task::ad, mc, quick_config(), seeds);
  const auto b = pretrain(w.english.train, w.english.val, Task::ad, mc, quick_config(), seeds);
  EXPECT_EQ(a.selected, b.selected);
  EXPECT_EQ(a.selected_run, b.selected_run);
  EXPECT_GE(ad_accuracy(a.selected.params, mc, data::pointers(w.english.val)), 0.9);

  const auto& run = a.runs[a.selected_run];
  double min_val = run.curve.front().val_loss;
  for (const auto& e : run.curve) min_val = std::min(min_val, e.val_loss);
  EXPECT_EQ(a.selected.val_loss, min_val);
  for (const auto& r : a.runs) EXPECT_GE(r.best->val_loss, a.selected.val_loss);
}

TEST(Pretrain, ParallelMatchesSerial) {
  const auto w = make_world(2);
  const std::vector<std::uint64_t> seeds{11, 12, 13, 14, 15};
  const auto mc = nn::ModelConfig::ad_detection();
  const auto serial = pretrain(w.english.train, w.english.val, Task::ad, mc, quick_config(4), seeds, false);
  const auto parallel = pretrain(w.english.train, w.english.val, Task::ad, mc, quick_config(4), seeds, true);
  EXPECT_EQ(serial.selected, parallel.selected);
  for (std::size_t i = 0; i < seeds.size(); ++i) EXPECT_EQ(serial.runs[i].curve, parallel.runs[i].curve);
}

TEST(Pretrain, DivergentRunsFailAndAllFailedIsAnError) {
  const auto w = make_world(3);
  auto config = quick_config(3);
  config.base_lr = 1e300;
  config.warmup_steps = 1;
  const std::vector<std::uint64_t> seeds{1, 2};
  EXPECT_THROW(pretrain(w.english.train, w.english.val, Task::ad, nn::ModelConfig::ad_detection(), config, seeds),
               NumericalError);
}

TEST(Pretrain, RejectsDuplicateSeeds) {
  const auto w = make_world(3);
  const std::vector<std::uint64_t> seeds{1, 1};
  EXPECT_THROW(pretrain(w.english.train, w.english.val, Task::ad, nn::ModelConfig::ad_detection(), quick_config(), seeds),
               ConfigError);
}

// ---------------------------------------------------------------- finetune

TEST(Finetune, ZeroEpochsReturnsPretrainedUnchanged) {
  const auto w = make_world(4);
  const auto mc = nn::ModelConfig::ad_detection();
  const nn::Checkpoint start{mc, nn::init_params(mc, 9), 9, 3, 0.5};
  const auto [a, b] = partition_greek(w.greek_pool);
  const auto r = finetune(start, w.english.train, w.english.val, a, b, Task::ad, quick_config(0));
  EXPECT_EQ(r.checkpoint, start);
  EXPECT_TRUE(r.curve.empty());
}

TEST(Finetune, UnbalancedQuartetIsAConfigError) {
  const auto w = make_world(4);
  const auto mc = nn::ModelConfig::ad_detection();
  const nn::Checkpoint start{mc, nn::init_params(mc, 9), 9, 0, 0.0};
  auto [a, b] = partition_greek(w.greek_pool);
  std::swap(a[0], b[1]);  // two AD in b's place of a control
  a[0].diagnosis = Diagnosis::ad;
  a[1].diagnosis = Diagnosis::ad;
  EXPECT_THROW(finetune(start, w.english.train, w.english.val, a, b, Task::ad, quick_config()), ConfigError);
  std::vector<data::Sample> odd(w.greek_pool.begin(), w.greek_pool.begin() + 6);
  EXPECT_THROW(partition_greek(odd), ConfigError);
}

TEST(Finetune, GreekPartitionIsSortedAndClassAlternating) {
  auto pool = make_samples(8, "G");
  std::reverse(pool.begin(), pool.end());
  const auto [a, b] = partition_greek(pool);
  // AD: G1 G3 G5 G7, control: G0 G2 G4 G6
  const auto ids = [](const std::vector<data::Sample>& v) {
    std::set<std::string> out;
    for (const auto& s : v) out.insert(s.id);
    return out;
  };
  EXPECT_EQ(ids(a), (std::set<std::string>{"G0", "G1", "G4", "G5"}));
  EXPECT_EQ(ids(b), (std::set<std::string>{"G2", "G3", "G6", "G7"}));
}

TEST(Finetune, AdaptationImprovesGreekAccuracyDeterministically) {
  const auto w = make_world(5);
  const auto mc = nn::ModelConfig::ad_detection();
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  data::Dataset greek_val;
  greek_val.samples = w.greek_pool;
  const auto pre = pretrain(w.english.train, greek_val, Task::ad, mc, quick_config(), seeds);
  const auto r = swap_and_average(pre.selected, w.english.train, w.english.val, w.greek_pool, Task::ad, quick_config());
  const auto again = swap_and_average(pre.selected, w.english.train, w.english.val, w.greek_pool, Task::ad, quick_config());
  EXPECT_EQ(r.averaged, again.averaged);

  const auto test = data::pointers(w.greek_test);
  const double before = ad_accuracy(pre.selected.params, mc, test);
  const double after = ad_accuracy(r.averaged.params, mc, test);
  EXPECT_GT(after, before);
  EXPECT_GE(after, 0.85);
}

// ---------------------------------------------------------------- averaging

TEST(Averaging, ZerosAndTwosGiveOnes) {
  const auto mc = nn::ModelConfig::mmse_regression();
  auto zeros = nn::make_params(mc), twos = nn::make_params(mc);
  for (auto* p : {&zeros, &twos}) {
    const double v = p == &zeros ? 0.0 : 2.0;
    for (const auto& f : nn::learnable_fields) (p->*f.member).fill(v);
    p->bn_running_mean.fill(v);
    p->bn_running_var.fill(v);
  }
  const auto avg = average_params(zeros, twos);
  for (const auto& f : nn::learnable_fields) {
    for (double v : (avg.*f.member).values()) EXPECT_EQ(v, 1.0);
  }
  for (double v : avg.bn_running_var.values()) EXPECT_EQ(v, 1.0);
}

TEST(Averaging, MatchesElementwiseOracleBitExactly) {
  const auto mc = nn::ModelConfig::ad_detection();
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = nn::init_params(mc, rng.below(1000)), b = nn::init_params(mc, 1000 + rng.below(1000));
    for (double& v : a.bn_running_mean.values()) v = rng.normal();
    for (double& v : b.bn_running_var.values()) v = rng.uniform(0.1, 3.0);
    const auto avg = average_params(a, b);
    for (const auto& f : nn::learnable_fields) {
      const auto &x = a.*f.member, &y = b.*f.member, &m = avg.*f.member;
      for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(m[i], (x[i] + y[i]) / 2.0);
    }
    for (std::size_t i = 0; i < avg.bn_running_mean.size(); ++i) {
      EXPECT_EQ(avg.bn_running_mean[i], (a.bn_running_mean[i] + b.bn_running_mean[i]) / 2.0);
      EXPECT_EQ(avg.bn_running_var[i], (a.bn_running_var[i] + b.bn_running_var[i]) / 2.0);
    }
    EXPECT_EQ(average_params(a, a), a);
    EXPECT_EQ(average_params(a, b), average_params(b, a));
  }
}

TEST(Averaging, ShapeMismatchIsRejected) {
  EXPECT_THROW(average_params(nn::make_params(nn::ModelConfig::ad_detection()),
                              nn::make_params(nn::ModelConfig::mmse_regression())),
               ConsistencyError);
}

// ------------------------------------------------------------------ predict

TEST(Predict, UniformLogitsTieBreakToAd) {
  const auto ds = data::make_synthetic({.n_per_class = 2, .seed = 1});
  const auto preds = predict_ad(constant_ad_model(0.0), ds);
  for (const auto& p : preds) {
    EXPECT_EQ(p.probability, 0.5);
    EXPECT_EQ(p.label, Diagnosis::ad);
  }
}

TEST(Predict, EnsembleAveragesProbabilities) {
  const auto ds = data::make_synthetic({.n_per_class = 2, .seed = 1});
  std::vector<nn::Checkpoint> models;
  for (double p : {0.9, 0.8, 0.7, 0.6, 0.5}) models.push_back(constant_ad_model(std::log(p / (1 - p))));
  const auto preds = predict_ad(models, ds);
  for (const auto& p : preds) {
    EXPECT_NEAR(p.probability, 0.70, 1e-12);
    EXPECT_EQ(p.label, Diagnosis::ad);
  }
}

TEST(Predict, EnsembleIsInvariantToModelOrder) {
  const auto ds = data::make_synthetic({.n_per_class = 10, .seed = 2});
  const auto mc = nn::ModelConfig::ad_detection();
  std::vector<nn::Checkpoint> models;
  for (std::uint64_t s = 0; s < 5; ++s) models.push_back({mc, nn::init_params(mc, s), s, 0, 0.0});
  const auto reference = predict_ad(models, ds);
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(std::span(models));
    EXPECT_EQ(predict_ad(models, ds), reference);
  }
  for (const auto& p : reference) {
    EXPECT_GE(p.probability, 0.0);
    EXPECT_LE(p.probability, 1.0);
  }
}

TEST(Predict, MismatchedModelsAreRejected) {
  const auto ds = data::make_synthetic({.n_per_class = 2, .seed = 1});
  std::vector<nn::Checkpoint> models{constant_ad_model(0.0)};
  auto other = nn::ModelConfig::ad_detection();
  other.hidden_dim = 6;
  models.push_back({other, nn::init_params(other, 1), 1, 0, 0.0});
  EXPECT_THROW(predict_ad(models, ds), ConfigError);
}

TEST(Predict, MmseDenormalizesSigmoidOutput) {
  const auto ds = data::make_synthetic({.n_per_class = 3, .seed = 4});
  std::map<std::string, double> probs;
  for (const auto& s : ds.samples) probs[s.id] = 0.3;
  const auto mc = nn::ModelConfig::mmse_regression();
  auto p = nn::init_params(mc, 1);
  p.out_weight.fill(0.0);

  p.out_bias[0] = 800.0;
  for (const auto& m : predict_mmse({mc, p, 1, 0, 0.0}, ds, probs)) EXPECT_EQ(m.score, 30.0);
  p.out_bias[0] = std::log(0.6667 / (1 - 0.6667));
  for (const auto& m : predict_mmse({mc, p, 1, 0, 0.0}, ds, probs)) EXPECT_NEAR(m.score, 20.0, 1e-2);

  for (std::uint64_t s = 0; s < 5; ++s) {
    for (const auto& m : predict_mmse({mc, nn::init_params(mc, s), s, 0, 0.0}, ds, probs)) {
      EXPECT_GE(m.score, 0.0);
      EXPECT_LE(m.score, 30.0);
    }
  }
  probs.erase(ds.samples[0].id);
  EXPECT_THROW(predict_mmse({mc, p, 1, 0, 0.0}, ds, probs), DataError);
}

// ----------------------------------------------------------------- evaluate

TEST(Evaluate, PublishedConfusionCountsReproduceHeadlineMetrics) {
  const auto r = report_from_counts(16, 2, 22, 6);
  const auto round3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };
  EXPECT_EQ(round3(*r.accuracy), 0.826);
  EXPECT_EQ(round3(*r.specificity), 0.917);
  EXPECT_EQ(round3(*r.precision), 0.889);
  EXPECT_EQ(round3(*r.sensitivity), 0.727);
  EXPECT_EQ(round3(*r.f1), 0.800);
  // ratio oracles straight from the counts
  EXPECT_EQ(*r.accuracy, 38.0 / 46.0);
  EXPECT_DOUBLE_EQ(*r.f1, 2 * (16.0 / 18.0) * (16.0 / 22.0) / (16.0 / 18.0 + 16.0 / 22.0));
  EXPECT_EQ(r.n(), 46u);
}

TEST(Evaluate, PerfectPredictions) {
  const auto truth = labelled({{Diagnosis::ad, 18}, {Diagnosis::control, 29}, {Diagnosis::ad, 21}});
  std::vector<AdPrediction> ad;
  std::vector<MmsePrediction> mmse;
  for (const auto& s : truth.samples) {
    ad.push_back({s.id, s.is_ad() ? 0.9 : 0.1, *s.diagnosis});
    mmse.push_back({s.id, static_cast<double>(*s.mmse_raw)});
  }
  const auto r = evaluate(ad, truth, mmse);
  for (const auto& m : {r.accuracy, r.specificity, r.precision, r.sensitivity, r.f1}) EXPECT_EQ(*m, 1.0);
  EXPECT_EQ(*r.rmse_mmse, 0.0);
}

TEST(Evaluate, RmseOnTheScoreScale) {
  const double pred[] = {15.0, 30.0}, truth[] = {30.0, 30.0};
  EXPECT_NEAR(rmse(pred, truth), std::sqrt(225.0 / 2.0), 1e-12);
  EXPECT_NEAR(rmse(pred, truth), 10.607, 1e-3);
}

TEST(Evaluate, UndefinedRatiosAreAbsent) {
  const auto truth = labelled({{Diagnosis::control, 29}, {Diagnosis::control, 28}});
  std::vector<AdPrediction> ad{{"S0", 0.1, Diagnosis::control}, {"S1", 0.2, Diagnosis::control}};
  const auto r = evaluate(ad, truth);
  EXPECT_FALSE(r.precision.has_value());
  EXPECT_FALSE(r.sensitivity.has_value());
  EXPECT_FALSE(r.f1.has_value());
  EXPECT_FALSE(r.rmse_mmse.has_value());
  EXPECT_EQ(*r.specificity, 1.0);
  EXPECT_TRUE(report_to_json(r)["precision"].is_null());
  EXPECT_NE(format_report(r).find("precision n/a"), std::string::npos);
}

TEST(Evaluate, CountsMatchClassTotals) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<Diagnosis, int>> rows;
    for (int i = 0; i < 30; ++i) rows.push_back({rng.below(2) ? Diagnosis::ad : Diagnosis::control, 20});
    const auto truth = labelled(rows);
    std::vector<AdPrediction> ad;
    for (const auto& s : truth.samples) {
      const double p = rng.uniform();
      ad.push_back({s.id, p, label_for(p)});
    }
    const auto r = evaluate(ad, truth);
    EXPECT_EQ(r.tp + r.fn, truth.count(Diagnosis::ad));
    EXPECT_EQ(r.tn + r.fp, truth.count(Diagnosis::control));
  }
}

TEST(Evaluate, UnknownIdIsAnError) {
  const auto truth = labelled({{Diagnosis::ad, 20}});
  std::vector<AdPrediction> ad{{"nope", 0.5, Diagnosis::ad}};
  EXPECT_THROW(evaluate(ad, truth), DataError);
}
