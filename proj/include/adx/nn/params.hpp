#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "adx/core/error.hpp"
#include "adx/core/random.hpp"
#include "adx/core/tensor.hpp"

namespace adx::nn {

/// Shape of the attention-pooling network. The attention scorer's
/// intermediate width is always twice the hidden width.
struct ModelConfig {
  std::size_t input_dim = 28;
  std::size_t hidden_dim = 12;
  std::size_t output_dim = 2;
  double dropout_rate = 0.3;
  std::size_t seq_len = 10;

  std::size_t attention_dim() const noexcept { return 2 * hidden_dim; }

  /// 25 acoustic functionals + age, gender, education; two logits.
  static ModelConfig ad_detection() { return {28, 12, 2, 0.3, 10}; }
  /// AD variant inputs + estimated AD probability; one sigmoid output.
  static ModelConfig mmse_regression() { return {29, 8, 1, 0.3, 10}; }

  void validate() const {
    if (input_dim == 0 || hidden_dim == 0 || output_dim == 0 || seq_len == 0) {
      throw ConfigError("model dimensions must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must lie in [0,1), got " + std::to_string(dropout_rate));
    }
  }

  bool operator==(const ModelConfig&) const = default;
};

/// Learnable element count; batch-norm running statistics excluded.
constexpr std::size_t count_params(std::size_t input_dim, std::size_t hidden_dim,
                                   std::size_t output_dim) noexcept {
  return 2 * input_dim                            // batch-norm gamma, beta
         + hidden_dim * (input_dim + 1)           // down-projection
         + 2 * hidden_dim * (hidden_dim + 1)      // attention layer 1
         + (2 * hidden_dim + 1)                   // attention layer 2
         + output_dim * (hidden_dim + 1);         // output head
}

inline std::size_t count_params(const ModelConfig& c) {
  return count_params(c.input_dim, c.hidden_dim, c.output_dim);
}

/// One tensor per learnable of the network. Shared by parameters, gradients
/// and optimizer moments so they can be walked field by field.
struct Learnables {
  Tensor bn_gamma;     // [input]
  Tensor bn_beta;      // [input]
  Tensor proj_weight;  // [hidden, input]
  Tensor proj_bias;    // [hidden]
  Tensor attn_w1;      // [2*hidden, hidden]
  Tensor attn_b1;      // [2*hidden]
  Tensor attn_w2;      // [1, 2*hidden]
  Tensor attn_b2;      // [1]
  Tensor out_weight;   // [output, hidden]
  Tensor out_bias;     // [output]

  /// Zero tensors with the shapes `config` implies.
  static Learnables zeros(const ModelConfig& c) {
    const auto in = c.input_dim, h = c.hidden_dim, a = c.attention_dim(), o = c.output_dim;
    Learnables l;
    l.bn_gamma = Tensor({in});
    l.bn_beta = Tensor({in});
    l.proj_weight = Tensor({h, in});
    l.proj_bias = Tensor({h});
    l.attn_w1 = Tensor({a, h});
    l.attn_b1 = Tensor({a});
    l.attn_w2 = Tensor({1, a});
    l.attn_b2 = Tensor({1});
    l.out_weight = Tensor({o, h});
    l.out_bias = Tensor({o});
    return l;
  }

  bool operator==(const Learnables&) const = default;
};

struct LearnableField {
  std::string_view name;
  Tensor Learnables::*member;
  bool is_weight_matrix;
};

/// Canonical field order; also the serialization and RNG-draw order.
inline constexpr std::array<LearnableField, 10> learnable_fields{{
    {"bn_gamma", &Learnables::bn_gamma, false},
    {"bn_beta", &Learnables::bn_beta, false},
    {"proj_weight", &Learnables::proj_weight, true},
    {"proj_bias", &Learnables::proj_bias, false},
    {"attn_w1", &Learnables::attn_w1, true},
    {"attn_b1", &Learnables::attn_b1, false},
    {"attn_w2", &Learnables::attn_w2, true},
    {"attn_b2", &Learnables::attn_b2, false},
    {"out_weight", &Learnables::out_weight, true},
    {"out_bias", &Learnables::out_bias, false},
}};

inline std::size_t element_count(const Learnables& l) {
  std::size_t n = 0;
  for (const auto& f : learnable_fields) n += (l.*f.member).size();
  return n;
}

inline bool same_shapes(const Learnables& a, const Learnables& b) {
  for (const auto& f : learnable_fields) {
    if ((a.*f.member).shape() != (b.*f.member).shape()) return false;
  }
  return true;
}

/// Gradients mirror the learnables exactly.
struct Gradients : Learnables {
  Gradients() = default;
  explicit Gradients(Learnables l) : Learnables(std::move(l)) {}
  static Gradients zeros(const ModelConfig& c) { return Gradients(Learnables::zeros(c)); }
};

/// Learnables plus batch-norm running statistics (buffers, never optimized).
struct ModelParams : Learnables {
  Tensor bn_running_mean;  // [input]
  Tensor bn_running_var;   // [input], strictly positive

  ModelParams() = default;
  explicit ModelParams(Learnables l) : Learnables(std::move(l)) {}

  bool operator==(const ModelParams&) const = default;
};

/// Expected shapes for `config`, zero weights, gamma 1 and unit running variance.
inline ModelParams make_params(const ModelConfig& c) {
  ModelParams p(Learnables::zeros(c));
  p.bn_gamma.fill(1.0);
  p.bn_running_mean = Tensor({c.input_dim}, 0.0);
  p.bn_running_var = Tensor({c.input_dim}, 1.0);
  return p;
}

/// Seeded initialization: each weight matrix uniform in +-1/sqrt(fan_in),
/// biases zero, gamma 1, beta 0.
inline ModelParams init_params(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  auto p = make_params(c);
  Rng rng(derive_seed(seed, streams::init));
  for (const auto& f : learnable_fields) {
    if (!f.is_weight_matrix) continue;
    auto& w = p.*f.member;
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.dim(1)));
    for (auto& x : w.values()) x = rng.uniform(-bound, bound);
  }
  return p;
}

/// Throws ConsistencyError if `p` does not fit `c`.
inline void check_params(const ModelParams& p, const ModelConfig& c) {
  const auto expected = make_params(c);
  for (const auto& f : learnable_fields) {
    if ((p.*f.member).shape() != (expected.*f.member).shape()) {
      throw ConsistencyError(std::string("parameter ") + std::string(f.name) + " has shape " +
                             shape_string((p.*f.member).shape()) + ", config expects " +
                             shape_string((expected.*f.member).shape()));
    }
  }
  if (p.bn_running_mean.shape() != expected.bn_running_mean.shape() ||
      p.bn_running_var.shape() != expected.bn_running_var.shape()) {
    throw ConsistencyError("batch-norm running statistics do not match input_dim");
  }
  for (std::size_t i = 0; i < p.bn_running_var.size(); ++i) {
    if (!(p.bn_running_var[i] > 0.0)) {
      throw ConsistencyError("bn_running_var[" + std::to_string(i) + "] is not strictly positive");
    }
  }
}

}  // namespace adx::nn
