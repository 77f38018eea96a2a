#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "adx/core/error.hpp"
#include "adx/nn/params.hpp"

namespace adx::optim {

/// Optimizer, schedule and loop hyperparameters.
struct TrainConfig {
  double base_lr = 3e-3;
  int warmup_steps = 100;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 30;
  std::uint64_t seed = 0;
  /// When false, batch-norm affine terms and biases are exempt from decay.
  bool decay_norm_and_bias = true;

  void validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
    if (warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

/// Linear warmup to base_lr at step == warmup_steps, constant afterward.
inline double lr_at(long long step, const TrainConfig& config) {
  if (step < 1) throw ConfigError("lr_at: step must be >= 1, got " + std::to_string(step));
  const double ramp = static_cast<double>(step) / static_cast<double>(config.warmup_steps);
  return config.base_lr * std::min(1.0, ramp);
}

struct OptimizerState {
  nn::Learnables first_moment;
  nn::Learnables second_moment;
  long long step_count = 0;

  static OptimizerState zeros(const nn::ModelConfig& c) {
    return {nn::Learnables::zeros(c), nn::Learnables::zeros(c), 0};
  }
};

/// One decoupled-decay Adam update:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
/// Every gradient element is checked before anything is modified.
inline void adamw_step(nn::Learnables& params, const nn::Gradients& grads, OptimizerState& state,
                       const TrainConfig& config) {
  if (!nn::same_shapes(params, grads) || !nn::same_shapes(params, state.first_moment) ||
      !nn::same_shapes(params, state.second_moment)) {
    throw ConsistencyError("adamw_step: parameter, gradient and moment shapes disagree");
  }
  for (const auto& f : nn::learnable_fields) {
    const auto& g = grads.*f.member;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericalError("non-finite gradient in " + std::string(f.name) + "[" +
                             std::to_string(i) + "] = " + std::to_string(g[i]));
      }
    }
  }

  ++state.step_count;
  const double lr = lr_at(state.step_count, config);
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);

  for (const auto& f : nn::learnable_fields) {
    auto& theta = params.*f.member;
    auto& m = state.first_moment.*f.member;
    auto& v = state.second_moment.*f.member;
    const auto& g = grads.*f.member;
    const double decay = (config.decay_norm_and_bias || f.is_weight_matrix) ? config.weight_decay : 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.epsilon) + decay * theta[i]);
    }
  }
}

}  // namespace adx::optim
