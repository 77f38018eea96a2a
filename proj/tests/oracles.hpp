#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "adx/core/random.hpp"
#include "adx/data/sample.hpp"
#include "adx/nn/model.hpp"
#include "adx/nn/params.hpp"

namespace adx::oracle {

/// Training accuracy of an L2-light logistic regression on the per-sample
/// segment means of the 25 acoustic channels, fit by full-batch gradient
/// descent on standardized inputs. Deliberately unrelated to the model
/// under test.
inline double logistic_regression_accuracy(const std::vector<data::Sample>& samples, int iterations = 2000) {
  const std::size_t n = samples.size(), d = data::kFunctionals;
  std::vector<std::vector<double>> x(n, std::vector<double>(d, 0.0));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < data::kSegments; ++t) {
      for (std::size_t c = 0; c < d; ++c) x[i][c] += samples[i].features(t, c) / data::kSegments;
    }
    y[i] = samples[i].is_ad() ? 1.0 : 0.0;
  }
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0, var = 0.0;
    for (const auto& row : x) mean += row[c];
    mean /= static_cast<double>(n);
    for (const auto& row : x) var += (row[c] - mean) * (row[c] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n)) + 1e-12;
    for (auto& row : x) row[c] = (row[c] - mean) / sd;
  }
  std::vector<double> w(d, 0.0);
  double b = 0.0;
  const double lr = 0.5, l2 = 1e-4;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> gw(d, 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = b;
      for (std::size_t c = 0; c < d; ++c) z += w[c] * x[i][c];
      const double err = 1.0 / (1.0 + std::exp(-z)) - y[i];
      for (std::size_t c = 0; c < d; ++c) gw[c] += err * x[i][c];
      gb += err;
    }
    for (std::size_t c = 0; c < d; ++c) w[c] -= lr * (gw[c] / static_cast<double>(n) + l2 * w[c]);
    b -= lr * gb / static_cast<double>(n);
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = b;
    for (std::size_t c = 0; c < d; ++c) z += w[c] * x[i][c];
    correct += (z >= 0.0) == (y[i] == 1.0) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

/// Random parameters with non-trivial batch-norm affine and running stats.
inline nn::ModelParams random_params(const nn::ModelConfig& c, std::uint64_t seed) {
  auto p = nn::init_params(c, seed);
  Rng rng(seed + 99);
  for (auto& v : p.bn_gamma.values()) v = rng.uniform(0.5, 1.5);
  for (auto& v : p.bn_beta.values()) v = rng.uniform(-0.5, 0.5);
  for (auto& v : p.proj_bias.values()) v = rng.uniform(-0.2, 0.2);
  for (auto& v : p.attn_b1.values()) v = rng.uniform(-0.2, 0.2);
  for (auto& v : p.out_bias.values()) v = rng.uniform(-0.2, 0.2);
  p.attn_b2[0] = rng.uniform(-0.2, 0.2);
  for (auto& v : p.bn_running_mean.values()) v = rng.uniform(-1.0, 1.0);
  for (auto& v : p.bn_running_var.values()) v = rng.uniform(0.5, 2.0);
  return p;
}

inline double projected_loss(const Tensor& x, nn::ModelParams p, const nn::ModelConfig& c,
                             const nn::DropoutMasks& masks, const Tensor& weights) {
  const auto y = nn::model_forward(x, p, c, masks).outputs;
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * weights[i];
  return s;
}

/// Max relative error between analytic gradients and central differences of
/// the loss sum(outputs * weights), dropout masks held fixed.
inline double max_gradient_error(const nn::ModelConfig& c, std::uint64_t seed) {
  auto params = random_params(c, seed);
  Rng rng(seed * 31 + 7);
  const std::size_t batch = 3;
  const auto x = random_tensor({batch, c.seq_len, c.input_dim}, rng, 1.5);
  const auto masks = nn::sample_dropout_masks(batch, c, rng);
  const auto weights = random_tensor({batch, c.output_dim}, rng);

  auto fwd_params = params;
  const auto fwd = nn::model_forward(x, fwd_params, c, masks);
  const auto grads = nn::model_backward(*fwd.cache, params, c, weights);

  const double h = 1e-5;
  double worst = 0.0;
  for (const auto& f : nn::learnable_fields) {
    for (std::size_t i = 0; i < (params.*f.member).size(); ++i) {
      auto plus = params, minus = params;
      (plus.*f.member)[i] += h;
      (minus.*f.member)[i] -= h;
      const double numeric = (projected_loss(x, plus, c, masks, weights) - projected_loss(x, minus, c, masks, weights)) / (2 * h);
      const double analytic = (grads.*f.member)[i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}

}  // namespace adx::oracle
