#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "adx/core/error.hpp"
#include "adx/core/random.hpp"
#include "adx/core/tensor.hpp"
#include "adx/nn/params.hpp"

namespace adx::nn {

enum class Mode { train, eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// Sum of `terms` taken in ascending value order. Used for reductions over
/// time so the result does not depend on timestep order. Reorders `terms`.
inline double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------- batch norm

struct BatchNormCache {
  Tensor normalized;             // [B,T,C]
  std::vector<double> mean;      // per channel, batch-and-time pooled
  std::vector<double> variance;  // biased
  std::vector<double> inv_std;   // 1/sqrt(variance + eps)
};

struct BatchNormResult {
  Tensor output;
  std::optional<BatchNormCache> cache;  // train mode only
};

/// Per-channel normalization over batch and time. In train mode the running
/// statistics are blended in with `momentum` (the running variance uses the
/// unbiased estimate); eval mode reads them and mutates nothing.
inline BatchNormResult batch_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                          Tensor& running_mean, Tensor& running_var, Mode mode,
                                          double momentum = kBatchNormMomentum) {
  if (x.rank() != 3) throw DimensionError("batch norm expects a [batch, seq, channel] tensor");
  const std::size_t batch = x.dim(0), seq = x.dim(1), channels = x.dim(2);
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw DimensionError("batch norm: axis 'channel' has " + std::to_string(channels) +
                         " entries but parameters have " + std::to_string(gamma.size()));
  }
  const std::size_t rows = batch * seq;
  Tensor out(x.shape());

  if (mode == Mode::eval) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < channels; ++c) {
        const double inv = 1.0 / std::sqrt(running_var[c] + kBatchNormEpsilon);
        const std::size_t i = r * channels + c;
        out[i] = gamma[c] * (x[i] - running_mean[c]) * inv + beta[c];
      }
    }
    return {std::move(out), std::nullopt};
  }

  if (rows < 2) {
    throw DimensionError("train-mode batch norm needs batch*seq >= 2, got " + std::to_string(rows));
  }
  BatchNormCache cache{Tensor(x.shape()), std::vector<double>(channels, 0.0),
                       std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
  const double n = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) cache.mean[c] += x[r * channels + c];
  }
  for (auto& m : cache.mean) m /= n;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = x[r * channels + c] - cache.mean[c];
      cache.variance[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    cache.variance[c] /= n;
    cache.inv_std[c] = 1.0 / std::sqrt(cache.variance[c] + kBatchNormEpsilon);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t i = r * channels + c;
      const double xhat = (x[i] - cache.mean[c]) * cache.inv_std[c];
      cache.normalized[i] = xhat;
      out[i] = gamma[c] * xhat + beta[c];
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    const double unbiased = cache.variance[c] * n / (n - 1.0);
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * cache.mean[c];
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
  }
  return {std::move(out), std::move(cache)};
}

inline BatchNormResult batch_norm_forward(const Tensor& x, ModelParams& params, Mode mode,
                                          double momentum = kBatchNormMomentum) {
  return batch_norm_forward(x, params.bn_gamma, params.bn_beta, params.bn_running_mean,
                            params.bn_running_var, mode, momentum);
}

// ------------------------------------------------------------------- dropout

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 0 or 1/(1-rate) per element
};

inline void check_dropout_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0,1), got " + std::to_string(rate));
  }
}

/// Draws an inverted-dropout mask shaped like `shape`.
inline Tensor dropout_mask(const std::vector<std::size_t>& shape, double rate, Rng& rng) {
  check_dropout_rate(rate);
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask.values()) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

inline DropoutResult dropout(const Tensor& x, double rate, Rng& rng, Mode mode) {
  check_dropout_rate(rate);
  if (mode == Mode::eval) return {x, Tensor(x.shape(), 1.0)};
  auto mask = dropout_mask(x.shape(), rate, rng);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
  return {std::move(out), std::move(mask)};
}

// --------------------------------------------------------- attention pooling

struct PoolResult {
  Tensor pooled;   // [B,H]
  Tensor weights;  // [B,T]
};

/// Softmax over time of `scores` [B,T], then the weighted sum of `h` [B,T,H].
inline PoolResult pool_with_scores(const Tensor& h, const Tensor& scores) {
  const std::size_t batch = h.dim(0), seq = h.dim(1), hidden = h.dim(2);
  if (scores.rank() != 2 || scores.dim(0) != batch || scores.dim(1) != seq) {
    throw DimensionError("attention scores must be [batch, seq]");
  }
  PoolResult r{Tensor({batch, hidden}), Tensor({batch, seq})};
  std::vector<double> terms(seq);
  for (std::size_t b = 0; b < batch; ++b) {
    double max_score = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < seq; ++t) max_score = std::max(max_score, scores(b, t));
    for (std::size_t t = 0; t < seq; ++t) terms[t] = std::exp(scores(b, t) - max_score);
    std::vector<double> exps = terms;
    const double denom = sorted_sum(terms);
    for (std::size_t t = 0; t < seq; ++t) r.weights(b, t) = exps[t] / denom;
    for (std::size_t j = 0; j < hidden; ++j) {
      for (std::size_t t = 0; t < seq; ++t) terms[t] = r.weights(b, t) * h(b, t, j);
      r.pooled(b, j) = sorted_sum(terms);
    }
  }
  return r;
}

struct AttentionCache {
  Tensor hidden;      // [B,T,H] pooled inputs
  Tensor layer1;      // [B,T,A] pre-dropout
  Tensor mask;        // [B,T,A]
  Tensor activated;   // [B,T,A] relu(dropout(layer1))
  Tensor scores;      // [B,T]
  Tensor weights;     // [B,T]
};

struct AttentionResult {
  Tensor pooled;
  Tensor weights;
  std::optional<AttentionCache> cache;
};

namespace detail {

/// Scorer hidden -> 2*hidden -> 1, dropout then ReLU between the layers.
/// A null mask means eval mode.
inline AttentionResult attention_forward(const Tensor& h, const Learnables& p, const Tensor* mask) {
  if (h.rank() != 3) throw DimensionError("attention pooling expects a [batch, seq, hidden] tensor");
  const std::size_t batch = h.dim(0), seq = h.dim(1), hidden = h.dim(2);
  if (seq == 0) throw DimensionError("attention pooling needs seq >= 1");
  if (p.attn_w1.dim(1) != hidden) {
    throw DimensionError("attention pooling: axis 'hidden' is " + std::to_string(hidden) +
                         ", scorer expects " + std::to_string(p.attn_w1.dim(1)));
  }
  const std::size_t att = p.attn_w1.dim(0);
  if (mask && mask->shape() != std::vector<std::size_t>{batch, seq, att}) {
    throw ConsistencyError("attention dropout mask shape " + shape_string(mask->shape()) +
                           " does not match activations");
  }
  Tensor layer1({batch, seq, att});
  Tensor activated({batch, seq, att});
  Tensor scores({batch, seq});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t a = 0; a < att; ++a) {
        double z = p.attn_b1[a];
        for (std::size_t j = 0; j < hidden; ++j) z += p.attn_w1(a, j) * h(b, t, j);
        layer1(b, t, a) = z;
        const double dropped = mask ? z * (*mask)(b, t, a) : z;
        activated(b, t, a) = dropped > 0.0 ? dropped : 0.0;
      }
      double s = p.attn_b2[0];
      for (std::size_t a = 0; a < att; ++a) s += p.attn_w2(0, a) * activated(b, t, a);
      scores(b, t) = s;
    }
  }
  auto pooled = pool_with_scores(h, scores);
  AttentionResult r{std::move(pooled.pooled), pooled.weights, std::nullopt};
  if (mask) {
    r.cache = AttentionCache{h, std::move(layer1), *mask, std::move(activated), std::move(scores),
                             std::move(pooled.weights)};
  }
  return r;
}

}  // namespace detail

/// Collapses the time axis of `h` with learned softmax weights.
inline AttentionResult attention_pool(const Tensor& h, const Learnables& params, Rng& rng, Mode mode,
                                      double dropout_rate) {
  if (mode == Mode::eval) return detail::attention_forward(h, params, nullptr);
  const auto mask = dropout_mask({h.dim(0), h.dim(1), params.attn_w1.dim(0)}, dropout_rate, rng);
  return detail::attention_forward(h, params, &mask);
}

}  // namespace adx::nn
