#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dgm/nn.hpp"
#include "dgm/ops.hpp"
#include "dgm/rng.hpp"
#include "dgm/tape.hpp"
#include "dgm/tensor.hpp"

namespace dgm {

enum class LayerKind {
  kConv2d,
  kBatchNorm,
  kRelu,
  kMaxPool,
  kAvgPool,
  kGlobalAvgPool,
  kDense,
  kDropout,
  kSoftmax,
  kDenseUnit,  // BN-ReLU-conv1x1-BN-ReLU-conv3x3, output concatenated with input
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kAvgPool: return "avg_pool";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kDenseUnit: return "dense_unit";
  }
  return "?";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
  for (LayerKind k :
       {LayerKind::kConv2d, LayerKind::kBatchNorm, LayerKind::kRelu, LayerKind::kMaxPool,
        LayerKind::kAvgPool, LayerKind::kGlobalAvgPool, LayerKind::kDense, LayerKind::kDropout,
        LayerKind::kSoftmax, LayerKind::kDenseUnit})
    if (s == layer_kind_name(k)) return k;
  fail(ErrorCode::kInvalidArgument, "unknown layer kind '" + s + "'");
}

// One layer of a model. A flat struct keeps the spec of every kind in one
// place and serializes without dispatch; unused fields stay default.
struct Layer {
  LayerKind kind{};
  std::string name;
  bool trainable = true;

  Tensor weight;            // conv: Cout x Cin x kh x kw; dense: Cin x Cout
  Tensor bias;              // dense only
  int stride = 1, pad = 0;  // conv

  BatchNormState bn;  // batch_norm only

  int pool_k = 0, pool_stride = 1, pool_pad = 0;

  float rate = 0.0f;  // dropout
  std::vector<Layer> sub;  // dense_unit members
};

struct StageShape {
  std::string label;
  int channels = 0, height = 0, width = 0;
};

// Parameter visitor; `is_stat` marks BN running statistics, which serialize
// but never train.
using ParamVisitor = std::function<void(Layer&, Tensor&, bool is_stat)>;

inline void visit_params(Layer& l, const ParamVisitor& fn) {
  switch (l.kind) {
    case LayerKind::kConv2d:
      fn(l, l.weight, false);
      break;
    case LayerKind::kDense:
      fn(l, l.weight, false);
      fn(l, l.bias, false);
      break;
    case LayerKind::kBatchNorm:
      fn(l, l.bn.gamma, false);
      fn(l, l.bn.beta, false);
      fn(l, l.bn.running_mean, true);
      fn(l, l.bn.running_var, true);
      break;
    case LayerKind::kDenseUnit:
      for (Layer& s : l.sub) visit_params(s, fn);
      break;
    default:
      break;
  }
}

// A trained or in-training network: ordered layers plus the metadata needed
// to rebuild, rerun, and interpret it.
struct ModelSpec {
  std::vector<Layer> layers;
  int backbone_len = 0;  // layers [0, backbone_len) form the backbone
  int input_c = 0, input_h = 0, input_w = 0;
  uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::string config_echo;
  std::vector<StageShape> trace;

  void for_each_param(const ParamVisitor& fn) {
    for (Layer& l : layers) visit_params(l, fn);
  }
};

namespace detail {

inline Tensor apply_layer(Layer& l, const Tensor& x, Mode mode, Tape* tape, RngStream* drop_rng);

inline Tensor apply_layers(std::vector<Layer>& layers, const Tensor& x, Mode mode, Tape* tape,
                           RngStream* drop_rng) {
  Tensor cur = x;
  for (size_t i = 0; i < layers.size(); ++i) {
    try {
      cur = apply_layer(layers[i], cur, mode, tape, drop_rng);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kShapeMismatch)
        fail(ErrorCode::kShapeMismatch,
             "layer " + std::to_string(i) + " (" + layers[i].name + "): " + e.what());
      throw;
    }
  }
  return cur;
}

inline Tensor apply_layer(Layer& l, const Tensor& x, Mode mode, Tape* tape, RngStream* drop_rng) {
  switch (l.kind) {
    case LayerKind::kConv2d:
      return conv2d(tape, x, l.weight, l.stride, l.pad);
    case LayerKind::kBatchNorm: {
      // Frozen BN runs on its running statistics and stops updating them.
      Mode eff = l.trainable ? mode : Mode::kEval;
      return batch_norm(tape, x, l.bn, eff);
    }
    case LayerKind::kRelu:
      return relu(tape, x);
    case LayerKind::kMaxPool:
      return pool2d(tape, x, PoolKind::kMax, l.pool_k, l.pool_stride, l.pool_pad);
    case LayerKind::kAvgPool:
      return pool2d(tape, x, PoolKind::kAvg, l.pool_k, l.pool_stride, l.pool_pad);
    case LayerKind::kGlobalAvgPool:
      return global_avg_pool(tape, x);
    case LayerKind::kDense:
      return dense(tape, x, l.weight, l.bias);
    case LayerKind::kDropout: {
      if (mode == Mode::kEval || l.rate == 0.0f) return x;
      if (!drop_rng)
        fail(ErrorCode::kInvalidArgument, "dropout in train mode needs an rng stream");
      return dropout(tape, x, {l.rate, mode}, *drop_rng);
    }
    case LayerKind::kSoftmax:
      return softmax(x);
    case LayerKind::kDenseUnit: {
      Tensor grown = apply_layers(l.sub, x, mode, tape, drop_rng);
      return concat_channels(tape, {x, grown});
    }
  }
  fail(ErrorCode::kInvalidArgument, "apply_layer: bad kind");
}

}  // namespace detail

// Full forward pass including a trailing softmax layer when present.
inline Tensor forward(ModelSpec& m, const Tensor& x, Mode mode, Tape* tape = nullptr,
                      RngStream* drop_rng = nullptr) {
  return detail::apply_layers(m.layers, x, mode, tape, drop_rng);
}

// Forward pass that stops before the trailing softmax; training losses take
// these logits into softmax_cross_entropy instead.
inline Tensor forward_logits(ModelSpec& m, const Tensor& x, Mode mode, Tape* tape = nullptr,
                             RngStream* drop_rng = nullptr) {
  Tensor cur = x;
  size_t n = m.layers.size();
  if (n > 0 && m.layers[n - 1].kind == LayerKind::kSoftmax) --n;
  for (size_t i = 0; i < n; ++i)
    cur = detail::apply_layer(m.layers[i], cur, mode, tape, drop_rng);
  return cur;
}

}  // namespace dgm
