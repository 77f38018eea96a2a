#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adx/nn/checkpoint.hpp"
#include "adx/nn/layers.hpp"
#include "adx/nn/model.hpp"
#include "adx/nn/params.hpp"
#include "oracles.hpp"

using namespace adx;
using namespace adx::nn;
using adx::oracle::random_params;
using adx::oracle::max_gradient_error;
using adx::oracle::random_tensor;

namespace {

ModelConfig small_config(std::size_t out = 2) { return {5, 4, out, 0.3, 10}; }

}  // namespace

// ------------------------------------------------------------- count_params

TEST(CountParams, MatchesPublishedSizes) {
  EXPECT_EQ(count_params(ModelConfig::ad_detection()), 767u);
  EXPECT_EQ(count_params(ModelConfig::mmse_regression()), 468u);
  EXPECT_EQ(count_params(1, 1, 1), 13u);
}

TEST(CountParams, EqualsAllocatedLearnablesForRandomConfigs) {
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    const ModelConfig c{1 + rng.below(40), 1 + rng.below(20), 1 + rng.below(4), 0.3, 10};
    const auto p = init_params(c, static_cast<std::uint64_t>(i));
    EXPECT_EQ(element_count(p), count_params(c));
  }
}

TEST(InitParams, BiasesZeroGammaOneWeightsBounded) {
  const auto c = ModelConfig::ad_detection();
  const auto p = init_params(c, 3);
  for (double v : p.proj_bias.values()) EXPECT_EQ(v, 0.0);
  for (double v : p.bn_gamma.values()) EXPECT_EQ(v, 1.0);
  for (double v : p.bn_beta.values()) EXPECT_EQ(v, 0.0);
  const double bound = 1.0 / std::sqrt(28.0);
  for (double v : p.proj_weight.values()) EXPECT_LE(std::abs(v), bound);
  EXPECT_EQ(init_params(c, 3), p);
  EXPECT_NE(init_params(c, 4), p);
}

// --------------------------------------------------------------- batch norm

TEST(BatchNorm, TwoValueChannelNormalizesToPlusMinusOne) {
  Tensor x({1, 2, 1}, std::vector<double>{1.0, 3.0});
  auto gamma = Tensor::vector({1.0}), beta = Tensor::vector({0.0});
  auto rm = Tensor::vector({0.0}), rv = Tensor::vector({1.0});
  const auto r = batch_norm_forward(x, gamma, beta, rm, rv, Mode::train);
  EXPECT_NEAR(r.output[0], -1.0, 1e-4);
  EXPECT_NEAR(r.output[1], 1.0, 1e-4);
  EXPECT_DOUBLE_EQ(r.cache->mean[0], 2.0);
  EXPECT_DOUBLE_EQ(r.cache->variance[0], 1.0);
  // running stats: momentum 0.1, unbiased variance 2
  EXPECT_DOUBLE_EQ(rm[0], 0.2);
  EXPECT_DOUBLE_EQ(rv[0], 0.9 + 0.1 * 2.0);
}

TEST(BatchNorm, StandardizedInputIsAFixedPoint) {
  // per channel: values {-1, 1, -1, 1} have mean 0 and biased variance 1
  Tensor x({2, 2, 2}, std::vector<double>{-1, 1, 1, -1, -1, 1, 1, -1});
  auto gamma = Tensor::vector({1.0, 1.0}), beta = Tensor::vector({0.0, 0.0});
  auto rm = Tensor::vector({0.0, 0.0}), rv = Tensor::vector({1.0, 1.0});
  const auto r = batch_norm_forward(x, gamma, beta, rm, rv, Mode::train);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(r.output[i], x[i], 1e-4);
}

TEST(BatchNorm, ZeroGammaCollapsesToBeta) {
  Rng rng(1);
  const auto x = random_tensor({3, 4, 2}, rng);
  auto gamma = Tensor::vector({0.0, 0.0}), beta = Tensor::vector({5.0, 5.0});
  auto rm = Tensor::vector({0.0, 0.0}), rv = Tensor::vector({1.0, 1.0});
  for (auto mode : {Mode::train, Mode::eval}) {
    const auto r = batch_norm_forward(x, gamma, beta, rm, rv, mode);
    for (double v : r.output.values()) EXPECT_EQ(v, 5.0);
  }
}

TEST(BatchNorm, TrainOutputIsStandardizedPerChannel) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    auto x = random_tensor({6, 10, 4}, rng, 3.0);
    for (auto& v : x.values()) v += 7.0;
    Tensor gamma({4}, 1.0), beta({4}, 0.0), rm({4}, 0.0), rv({4}, 1.0);
    const auto r = batch_norm_forward(x, gamma, beta, rm, rv, Mode::train);
    for (std::size_t c = 0; c < 4; ++c) {
      double mean = 0.0, var = 0.0;
      for (std::size_t i = c; i < x.size(); i += 4) mean += r.output[i];
      mean /= 60.0;
      for (std::size_t i = c; i < x.size(); i += 4) var += (r.output[i] - mean) * (r.output[i] - mean);
      var /= 60.0;
      EXPECT_LT(std::abs(mean), 1e-6);
      EXPECT_NEAR(var, 1.0, 1e-4);
    }
  }
}

TEST(BatchNorm, EvalModeUsesRunningStatsAndMutatesNothing) {
  Tensor x({1, 1, 1}, std::vector<double>{4.0});
  auto gamma = Tensor::vector({2.0}), beta = Tensor::vector({1.0});
  auto rm = Tensor::vector({2.0}), rv = Tensor::vector({4.0 - kBatchNormEpsilon});
  const auto r = batch_norm_forward(x, gamma, beta, rm, rv, Mode::eval);
  EXPECT_NEAR(r.output[0], 2.0 * (4.0 - 2.0) / 2.0 + 1.0, 1e-12);
  EXPECT_FALSE(r.cache.has_value());
  EXPECT_EQ(rm[0], 2.0);
}

TEST(BatchNorm, TrainModeRejectsSingleRow) {
  Tensor x({1, 1, 3});
  Tensor gamma({3}, 1.0), beta({3}), rm({3}), rv({3}, 1.0);
  EXPECT_THROW(batch_norm_forward(x, gamma, beta, rm, rv, Mode::train), DimensionError);
}

// ------------------------------------------------------------------ dropout

TEST(Dropout, EvalIsIdentity) {
  Rng rng(2);
  const auto x = random_tensor({3, 5}, rng);
  const auto r = dropout(x, 0.7, rng, Mode::eval);
  EXPECT_EQ(r.output, x);
}

TEST(Dropout, ZeroRateKeepsEverything) {
  Rng rng(2);
  const auto x = random_tensor({3, 5}, rng);
  const auto r = dropout(x, 0.0, rng, Mode::train);
  EXPECT_EQ(r.output, x);
  for (double m : r.mask.values()) EXPECT_EQ(m, 1.0);
}

TEST(Dropout, InvertedScalingPreservesTheMean) {
  Rng rng(3);
  const Tensor x({100000}, 1.0);
  const auto r = dropout(x, 0.5, rng, Mode::train);
  const double mean = std::accumulate(r.output.values().begin(), r.output.values().end(), 0.0) / 1e5;
  EXPECT_NEAR(mean, 1.0, 0.02);
  for (double v : r.output.values()) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(Dropout, RateOfOneIsAConfigError) {
  Rng rng(0);
  EXPECT_THROW(dropout(Tensor({2}), 1.0, rng, Mode::train), ConfigError);
  EXPECT_THROW(dropout(Tensor({2}), -0.1, rng, Mode::train), ConfigError);
}

// -------------------------------------------------------- attention pooling

TEST(AttentionPool, SingleTimestepGetsAllWeight) {
  const auto c = ModelConfig{3, 3, 1, 0.0, 1};
  const auto p = random_params(c, 5);
  Tensor h({1, 1, 3}, std::vector<double>{0.3, -1.2, 2.0});
  Rng rng(0);
  const auto r = attention_pool(h, p, rng, Mode::eval, 0.0);
  EXPECT_EQ(r.weights[0], 1.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.pooled[j], h[j]);
}

TEST(AttentionPool, IdenticalTimestepsPoolToThatVector) {
  const auto c = small_config();
  const auto p = random_params(c, 6);
  Tensor h({1, 10, 4});
  const std::vector<double> v{0.5, -0.25, 1.5, 3.0};
  for (std::size_t t = 0; t < 10; ++t) {
    for (std::size_t j = 0; j < 4; ++j) h(0, t, j) = v[j];
  }
  Rng rng(0);
  const auto r = attention_pool(h, p, rng, Mode::eval, 0.3);
  for (std::size_t t = 0; t < 10; ++t) EXPECT_NEAR(r.weights(0, t), 0.1, 1e-15);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(r.pooled(0, j), v[j], 1e-14);
}

TEST(AttentionPool, ForcedScoresGiveHandComputedPooling) {
  Tensor h({1, 2, 1}, std::vector<double>{1.0, 3.0});
  Tensor scores({1, 2}, std::vector<double>{std::log(1.0), std::log(3.0)});
  const auto r = pool_with_scores(h, scores);
  EXPECT_NEAR(r.weights(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(r.weights(0, 1), 0.75, 1e-15);
  EXPECT_NEAR(r.pooled(0, 0), 2.5, 1e-15);
}

TEST(AttentionPool, WeightsAreADistributionInBothModes) {
  const auto c = small_config();
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(c, static_cast<std::uint64_t>(trial));
    const auto h = random_tensor({3, 10, 4}, rng, 2.0);
    for (auto mode : {Mode::train, Mode::eval}) {
      const auto r = attention_pool(h, p, rng, mode, 0.3);
      for (std::size_t b = 0; b < 3; ++b) {
        double sum = 0.0;
        for (std::size_t t = 0; t < 10; ++t) {
          EXPECT_GE(r.weights(b, t), 0.0);
          sum += r.weights(b, t);
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
    }
  }
}

// -------------------------------------------------------------- full model

TEST(ModelForward, EvalOutputIsInvariantToTimestepOrder) {
  for (std::size_t out : {1u, 2u}) {
    const auto c = ModelConfig{28, 12, out, 0.3, 10};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = random_params(c, seed);
      Rng rng(seed);
      const auto x = random_tensor({1, 10, 28}, rng);
      std::vector<std::size_t> perm(10);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span(perm));
      Tensor shuffled(x.shape());
      for (std::size_t t = 0; t < 10; ++t) {
        for (std::size_t ch = 0; ch < 28; ++ch) shuffled(0, t, ch) = x(0, perm[t], ch);
      }
      EXPECT_EQ(model_infer(x, p, c), model_infer(shuffled, p, c));
    }
  }
}

TEST(ModelForward, RegressionOutputsStayInsideTheUnitInterval) {
  const auto c = ModelConfig::mmse_regression();
  Rng rng(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto p = random_params(c, seed);
    const auto x = random_tensor({8, 10, 29}, rng, 3.0);
    for (auto mode : {Mode::train, Mode::eval}) {
      const auto y = model_forward(x, p, c, rng, mode).outputs;
      for (double v : y.values()) {
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
      }
    }
  }
}

TEST(ModelForward, EqualsCompositionOfStages) {
  const auto c = ModelConfig{7, 5, 2, 0.3, 10};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto p = random_params(c, seed);
    Rng rng(seed + 50);
    const auto x = random_tensor({3, 10, 7}, rng);

    // oracle: chain the individually tested stages by hand
    auto bn_params = p;
    const auto normalized = batch_norm_forward(x, bn_params, Mode::eval).output;
    Tensor hidden({3, 10, 5});
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t t = 0; t < 10; ++t)
        for (std::size_t j = 0; j < 5; ++j) {
          double z = p.proj_bias[j];
          for (std::size_t ch = 0; ch < 7; ++ch) z += p.proj_weight(j, ch) * normalized(b, t, ch);
          hidden(b, t, j) = std::max(0.0, dropout(Tensor({1}, z), 0.3, rng, Mode::eval).output[0]);
        }
    const auto pooled = attention_pool(hidden, p, rng, Mode::eval, 0.3).pooled;
    const auto y = model_infer(x, p, c);
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t k = 0; k < 2; ++k) {
        double o = p.out_bias[k];
        for (std::size_t j = 0; j < 5; ++j) o += p.out_weight(k, j) * pooled(b, j);
        EXPECT_NEAR(y(b, k), o, 1e-12);
      }
  }
}

TEST(ModelForward, EvalModeIsPure) {
  const auto c = ModelConfig::ad_detection();
  auto p = random_params(c, 1);
  const auto before = p;
  Rng rng(1);
  const auto x = random_tensor({4, 10, 28}, rng);
  const auto a = model_forward(x, p, c, rng, Mode::eval).outputs;
  const auto b = model_forward(x, p, c, rng, Mode::eval).outputs;
  EXPECT_EQ(a, b);
  EXPECT_EQ(p, before);
}

TEST(ModelForward, TrainModeUpdatesRunningStatistics) {
  const auto c = ModelConfig::ad_detection();
  auto p = init_params(c, 1);
  Rng rng(1);
  const auto x = random_tensor({4, 10, 28}, rng);
  const auto r = model_forward(x, p, c, rng, Mode::train);
  EXPECT_TRUE(r.cache.has_value());
  EXPECT_NE(p.bn_running_mean, Tensor({28}, 0.0));
}

TEST(ModelForward, ShapeMismatchNamesTheAxis) {
  const auto c = ModelConfig::ad_detection();
  auto p = init_params(c, 1);
  Rng rng(1);
  try {
    model_forward(Tensor({2, 10, 27}), p, c, rng, Mode::eval);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("'channel'"), std::string::npos);
  }
  try {
    model_forward(Tensor({2, 9, 28}), p, c, rng, Mode::eval);
    FAIL();
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("'seq'"), std::string::npos);
  }
}

// ----------------------------------------------------------------- backward

TEST(ModelBackward, ZeroOutputGradientGivesZeroGradients) {
  const auto c = small_config();
  auto p = random_params(c, 2);
  Rng rng(2);
  const auto fwd = model_forward(random_tensor({3, 10, 5}, rng), p, c, rng, Mode::train);
  const auto g = model_backward(*fwd.cache, p, c, Tensor({3, 2}));
  for (const auto& f : learnable_fields) {
    for (double v : (g.*f.member).values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(ModelBackward, MatchesCentralDifferencesForClassifier) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(max_gradient_error(small_config(2), seed), 1e-4) << "seed " << seed;
  }
}

TEST(ModelBackward, MatchesCentralDifferencesForRegressor) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_LT(max_gradient_error(small_config(1), seed), 1e-4) << "seed " << seed;
  }
}

TEST(ModelBackward, OutputBiasGradientIsColumnSumOfOutputGradient) {
  const auto c = small_config(2);
  auto p = random_params(c, 3);
  Rng rng(3);
  const auto fwd = model_forward(random_tensor({4, 10, 5}, rng), p, c, rng, Mode::train);
  const auto og = random_tensor({4, 2}, rng);
  const auto g = model_backward(*fwd.cache, p, c, og);
  for (std::size_t k = 0; k < 2; ++k) {
    double col = 0.0;
    for (std::size_t b = 0; b < 4; ++b) col += og(b, k);
    EXPECT_NEAR(g.out_bias[k], col, 1e-14);
  }
}

TEST(ModelBackward, RejectsMismatchedCacheOrParams) {
  const auto c = small_config(2);
  auto p = random_params(c, 3);
  Rng rng(3);
  const auto fwd = model_forward(random_tensor({4, 10, 5}, rng), p, c, rng, Mode::train);
  EXPECT_THROW(model_backward(*fwd.cache, p, c, Tensor({3, 2})), ConsistencyError);
  const auto other = ModelConfig{5, 6, 2, 0.3, 10};
  EXPECT_THROW(model_backward(*fwd.cache, init_params(other, 1), other, Tensor({4, 2})), ConsistencyError);
  EXPECT_THROW(model_backward(*fwd.cache, init_params(other, 1), c, Tensor({4, 2})), ConsistencyError);
}

// --------------------------------------------------------------- checkpoint

TEST(Checkpoint, JsonRoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto c = seed % 2 ? ModelConfig::mmse_regression() : ModelConfig::ad_detection();
    const Checkpoint ck{c, random_params(c, seed), seed, 17, 0.123456789012345678};
    const auto text = checkpoint_to_json(ck).dump();
    EXPECT_EQ(checkpoint_from_json(nlohmann::json::parse(text)), ck);
  }
}

TEST(Checkpoint, RejectsWrongShapesAndVersions) {
  const auto c = small_config();
  auto j = checkpoint_to_json({c, init_params(c, 1), 1, 1, 0.5});
  auto bad_version = j;
  bad_version["schema_version"] = 99;
  EXPECT_THROW(checkpoint_from_json(bad_version), DataError);
  auto bad_shape = j;
  bad_shape["tensors"]["proj_weight"]["shape"] = {4, 4};
  EXPECT_THROW(checkpoint_from_json(bad_shape), DataError);
  j["tensors"].erase("attn_b2");
  EXPECT_THROW(checkpoint_from_json(j), DataError);
}
