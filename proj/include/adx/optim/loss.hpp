#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "adx/core/error.hpp"
#include "adx/core/tensor.hpp"

namespace adx::optim {

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // dLoss/dInput, same shape as the input
};

/// Mean softmax cross-entropy over rows of `logits` [B,C]. Log-sum-exp is
/// shifted by the row max, so extreme logits do not overflow.
inline LossResult cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: logits must be [batch, classes] with one label per row");
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  LossResult r{0.0, Tensor(logits.shape())};
  if (batch == 0) return r;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw DataError("cross_entropy: label " + std::to_string(label) + " out of range at row " +
                      std::to_string(b));
    }
    double max_logit = logits(b, 0);
    for (std::size_t k = 1; k < classes; ++k) max_logit = std::max(max_logit, logits(b, k));
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(logits(b, k) - max_logit);
    const double log_norm = max_logit + std::log(sum);
    r.loss += log_norm - logits(b, static_cast<std::size_t>(label));
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(logits(b, k) - log_norm);
      r.grad(b, k) = (p - (static_cast<int>(k) == label ? 1.0 : 0.0)) * inv_batch;
    }
  }
  r.loss *= inv_batch;
  return r;
}

/// Mean squared error between `pred` [B,1] (or [B]) and `target`.
inline LossResult mse_loss(const Tensor& pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("mse_loss: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
  }
  LossResult r{0.0, Tensor(pred.shape())};
  if (pred.empty()) return r;
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    r.loss += d * d;
    r.grad[i] = 2.0 * d / n;
  }
  r.loss /= n;
  return r;
}

}  // namespace adx::optim
