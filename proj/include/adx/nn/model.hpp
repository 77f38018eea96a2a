#pragma once

#include <optional>
#include <string>

#include "adx/core/error.hpp"
#include "adx/core/random.hpp"
#include "adx/core/tensor.hpp"
#include "adx/nn/layers.hpp"
#include "adx/nn/params.hpp"

namespace adx::nn {

/// The two dropout realizations of one train-mode pass.
struct DropoutMasks {
  Tensor projection;  // [B,T,H]
  Tensor attention;   // [B,T,2H]
};

/// Everything model_backward needs from a train-mode forward.
struct ForwardCache {
  BatchNormCache batch_norm;
  Tensor normalized_input;  // batch-norm output [B,T,C]
  Tensor projected;         // pre-dropout projection [B,T,H]
  DropoutMasks masks;
  Tensor hidden;            // relu(dropout(projected)) [B,T,H]
  AttentionCache attention;
  Tensor pooled;            // [B,H]
  Tensor outputs;           // [B,O], post-sigmoid for the regression head
};

struct ForwardResult {
  Tensor outputs;            // logits [B,2] or sigmoid scores [B,1]
  Tensor attention_weights;  // [B,T]
  std::optional<ForwardCache> cache;
};

inline void check_input(const Tensor& x, const ModelConfig& config) {
  if (x.rank() != 3) {
    throw DimensionError("model input must be [batch, seq, channel], got rank " +
                         std::to_string(x.rank()));
  }
  if (x.dim(0) == 0) throw DimensionError("model input: axis 'batch' is empty");
  if (x.dim(1) != config.seq_len) {
    throw DimensionError("model input: axis 'seq' is " + std::to_string(x.dim(1)) + ", expected " +
                         std::to_string(config.seq_len));
  }
  if (x.dim(2) != config.input_dim) {
    throw DimensionError("model input: axis 'channel' is " + std::to_string(x.dim(2)) +
                         ", expected " + std::to_string(config.input_dim));
  }
}

inline DropoutMasks sample_dropout_masks(std::size_t batch, const ModelConfig& config, Rng& rng) {
  DropoutMasks m;
  m.projection = dropout_mask({batch, config.seq_len, config.hidden_dim}, config.dropout_rate, rng);
  m.attention = dropout_mask({batch, config.seq_len, config.attention_dim()}, config.dropout_rate, rng);
  return m;
}

namespace detail {

inline ForwardResult forward_impl(const Tensor& x, ModelParams& params, const ModelConfig& config,
                                  const DropoutMasks* masks, double momentum) {
  config.validate();
  check_input(x, config);
  check_params(params, config);
  const std::size_t batch = x.dim(0), seq = x.dim(1), in = config.input_dim,
                    hid = config.hidden_dim, out_dim = config.output_dim;
  const Mode mode = masks ? Mode::train : Mode::eval;
  if (masks && (masks->projection.shape() != std::vector<std::size_t>{batch, seq, hid})) {
    throw ConsistencyError("projection dropout mask shape " + shape_string(masks->projection.shape()) +
                           " does not match the batch");
  }

  auto bn = batch_norm_forward(x, params, mode, momentum);

  Tensor projected({batch, seq, hid});
  Tensor hidden({batch, seq, hid});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t j = 0; j < hid; ++j) {
        double z = params.proj_bias[j];
        for (std::size_t c = 0; c < in; ++c) z += params.proj_weight(j, c) * bn.output(b, t, c);
        projected(b, t, j) = z;
        const double dropped = masks ? z * masks->projection(b, t, j) : z;
        hidden(b, t, j) = dropped > 0.0 ? dropped : 0.0;
      }
    }
  }

  auto att = attention_forward(hidden, params, masks ? &masks->attention : nullptr);

  Tensor outputs({batch, out_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < out_dim; ++k) {
      double o = params.out_bias[k];
      for (std::size_t j = 0; j < hid; ++j) o += params.out_weight(k, j) * att.pooled(b, j);
      outputs(b, k) = out_dim == 1 ? sigmoid(o) : o;
    }
  }

  ForwardResult r{outputs, att.weights, std::nullopt};
  if (masks) {
    r.cache = ForwardCache{std::move(*bn.cache), std::move(bn.output), std::move(projected), *masks,
                           std::move(hidden), std::move(*att.cache), std::move(att.pooled),
                           std::move(outputs)};
  }
  return r;
}

}  // namespace detail

/// Batch norm -> projection -> dropout -> ReLU -> attention pool -> output
/// head. Train mode draws fresh dropout masks from `rng` and updates the
/// batch-norm running statistics; eval mode leaves `params` untouched.
inline ForwardResult model_forward(const Tensor& x, ModelParams& params, const ModelConfig& config,
                                   Rng& rng, Mode mode, double momentum = kBatchNormMomentum) {
  if (mode == Mode::eval) return detail::forward_impl(x, params, config, nullptr, momentum);
  const auto masks = sample_dropout_masks(x.dim(0), config, rng);
  return detail::forward_impl(x, params, config, &masks, momentum);
}

/// Train-mode forward with a given dropout realization.
inline ForwardResult model_forward(const Tensor& x, ModelParams& params, const ModelConfig& config,
                                   const DropoutMasks& masks, double momentum = kBatchNormMomentum) {
  return detail::forward_impl(x, params, config, &masks, momentum);
}

/// Eval-mode forward on frozen parameters.
inline Tensor model_infer(const Tensor& x, const ModelParams& params, const ModelConfig& config) {
  // Eval mode never writes through the reference.
  auto& mutable_params = const_cast<ModelParams&>(params);
  return detail::forward_impl(x, mutable_params, config, nullptr, 0.0).outputs;
}

/// Exact gradients of the loss with respect to every learnable, given
/// dLoss/dOutputs (post-sigmoid for the regression head) and the cache of a
/// train-mode forward on the same parameters.
inline Gradients model_backward(const ForwardCache& cache, const ModelParams& params,
                                const ModelConfig& config, const Tensor& output_grad) {
  check_params(params, config);
  const std::size_t batch = cache.outputs.dim(0), seq = config.seq_len, in = config.input_dim,
                    hid = config.hidden_dim, att = config.attention_dim(),
                    out_dim = config.output_dim;
  if (cache.normalized_input.shape() != std::vector<std::size_t>{batch, seq, in} ||
      cache.hidden.shape() != std::vector<std::size_t>{batch, seq, hid} ||
      cache.attention.layer1.shape() != std::vector<std::size_t>{batch, seq, att} ||
      cache.outputs.dim(1) != out_dim) {
    throw ConsistencyError("forward cache does not match the model configuration");
  }
  if (output_grad.shape() != cache.outputs.shape()) {
    throw ConsistencyError("output gradient shape " + shape_string(output_grad.shape()) +
                           " does not match outputs " + shape_string(cache.outputs.shape()));
  }

  auto g = Gradients::zeros(config);

  // Output head (through the sigmoid for the regression variant).
  Tensor d_logit({batch, out_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < out_dim; ++k) {
      const double y = cache.outputs(b, k);
      d_logit(b, k) = out_dim == 1 ? output_grad(b, k) * y * (1.0 - y) : output_grad(b, k);
    }
  }
  Tensor d_pooled({batch, hid});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < out_dim; ++k) {
      g.out_bias[k] += d_logit(b, k);
      for (std::size_t j = 0; j < hid; ++j) {
        g.out_weight(k, j) += d_logit(b, k) * cache.pooled(b, j);
        d_pooled(b, j) += d_logit(b, k) * params.out_weight(k, j);
      }
    }
  }

  // Weighted sum over time and the softmax that produced the weights.
  const auto& ac = cache.attention;
  Tensor d_hidden({batch, seq, hid});
  Tensor d_scores({batch, seq});
  for (std::size_t b = 0; b < batch; ++b) {
    std::vector<double> d_weight(seq, 0.0);
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t j = 0; j < hid; ++j) {
        d_hidden(b, t, j) += ac.weights(b, t) * d_pooled(b, j);
        d_weight[t] += d_pooled(b, j) * cache.hidden(b, t, j);
      }
    }
    double weighted = 0.0;
    for (std::size_t t = 0; t < seq; ++t) weighted += ac.weights(b, t) * d_weight[t];
    for (std::size_t t = 0; t < seq; ++t) d_scores(b, t) = ac.weights(b, t) * (d_weight[t] - weighted);
  }

  // Scorer: second layer, ReLU, dropout, first layer.
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      const double ds = d_scores(b, t);
      g.attn_b2[0] += ds;
      for (std::size_t a = 0; a < att; ++a) {
        g.attn_w2(0, a) += ds * ac.activated(b, t, a);
        const double relu_pass = ac.activated(b, t, a) > 0.0 ? 1.0 : 0.0;
        const double d_layer1 = ds * params.attn_w2(0, a) * relu_pass * ac.mask(b, t, a);
        if (d_layer1 == 0.0) continue;
        g.attn_b1[a] += d_layer1;
        for (std::size_t j = 0; j < hid; ++j) {
          g.attn_w1(a, j) += d_layer1 * cache.hidden(b, t, j);
          d_hidden(b, t, j) += d_layer1 * params.attn_w1(a, j);
        }
      }
    }
  }

  // ReLU and dropout after the projection, then the projection itself.
  Tensor d_normalized({batch, seq, in});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t j = 0; j < hid; ++j) {
        const double relu_pass = cache.hidden(b, t, j) > 0.0 ? 1.0 : 0.0;
        const double d_proj = d_hidden(b, t, j) * relu_pass * cache.masks.projection(b, t, j);
        if (d_proj == 0.0) continue;
        g.proj_bias[j] += d_proj;
        for (std::size_t c = 0; c < in; ++c) {
          g.proj_weight(j, c) += d_proj * cache.normalized_input(b, t, c);
          d_normalized(b, t, c) += d_proj * params.proj_weight(j, c);
        }
      }
    }
  }

  // Batch-norm affine. The input gradient is not needed: inputs are data.
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq; ++t) {
      for (std::size_t c = 0; c < in; ++c) {
        g.bn_beta[c] += d_normalized(b, t, c);
        g.bn_gamma[c] += d_normalized(b, t, c) * cache.batch_norm.normalized(b, t, c);
      }
    }
  }
  return g;
}

}  // namespace adx::nn
