#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dgm/model.hpp"
#include "dgm/rng.hpp"

namespace dgm {

// Backbone hyperparameters. Defaults are the canonical DenseNet201 constants
// (growth 32, bottleneck 4k, compression 0.5, 64-channel stem).
struct DenseNetConfig {
  std::vector<int> block_layers{6, 12, 48, 32};
  int growth_rate = 32;
  int bottleneck_width = 128;
  float compression = 0.5f;
  int stem_channels = 64;
  int input_c = 3, input_h = 224, input_w = 224;

  static DenseNetConfig densenet201() { return DenseNetConfig{}; }

  static DenseNetConfig toy() {
    DenseNetConfig c;
    c.block_layers = {2, 2};
    c.growth_rate = 8;
    c.bottleneck_width = 32;
    c.compression = 0.5f;
    c.stem_channels = 16;
    c.input_h = c.input_w = 32;
    return c;
  }

  void validate() const {
    if (block_layers.empty()) fail(ErrorCode::kInvalidArgument, "densenet: no blocks");
    for (int L : block_layers)
      if (L < 1) fail(ErrorCode::kInvalidArgument, "densenet: block layer count must be >= 1");
    if (growth_rate < 1 || bottleneck_width < 1 || stem_channels < 1)
      fail(ErrorCode::kInvalidArgument, "densenet: widths must be positive");
    if (compression <= 0.0f || compression > 1.0f)
      fail(ErrorCode::kInvalidArgument, "densenet: compression must be in (0,1]");
    if (input_c < 1 || input_h < 1 || input_w < 1)
      fail(ErrorCode::kInvalidArgument, "densenet: bad input size");
  }
};

// Classification head per the five-dense-layer design: widths 3n, n, 2n, n,
// n/2 with dropout after each, then the class layer and softmax.
struct HeadConfig {
  int neurons = 512;
  float dropout_rate = 0.1f;
  int n_classes = 3;

  void validate() const {
    if (neurons < 2 || neurons % 2 != 0)
      fail(ErrorCode::kInvalidArgument, "head: neurons must be even and >= 2");
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
      fail(ErrorCode::kInvalidArgument, "head: dropout must be in [0,1)");
    if (n_classes < 2) fail(ErrorCode::kInvalidArgument, "head: need >= 2 classes");
  }

  std::vector<int> dense_widths() const {
    return {neurons * 3, neurons, neurons * 2, neurons, neurons / 2, n_classes};
  }
};

namespace detail {

// Weight init: U(-b, b) with b = sqrt(6 / fan_in). Each parameterized layer
// draws from its own stream, mix64(seed, kStreamInit, layer_ordinal), so
// appending layers never reshuffles earlier ones.
struct InitContext {
  uint64_t seed = 0;
  int next_ordinal = 0;

  RngStream stream() { return RngStream(mix64(seed, kStreamInit, static_cast<uint64_t>(next_ordinal++))); }
};

inline Tensor uniform_init(Shape shape, int fan_in, RngStream rng) {
  float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape));
  float* p = t.mutable_data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = rng.next_uniform(-bound, bound);
  return t.with_requires_grad(true);
}

inline Layer make_conv(const std::string& name, int cin, int cout, int k, int stride, int pad,
                       InitContext& init) {
  Layer l;
  l.kind = LayerKind::kConv2d;
  l.name = name;
  l.weight = uniform_init({cout, cin, k, k}, cin * k * k, init.stream());
  l.stride = stride;
  l.pad = pad;
  return l;
}

inline Layer make_bn(const std::string& name, int channels, InitContext& init) {
  Layer l;
  l.kind = LayerKind::kBatchNorm;
  l.name = name;
  l.bn = BatchNormState::make(channels);
  ++init.next_ordinal;  // gamma=1, beta=0 draw nothing, but keep ordinals stable
  return l;
}

inline Layer make_relu(const std::string& name) {
  Layer l;
  l.kind = LayerKind::kRelu;
  l.name = name;
  return l;
}

inline Layer make_dense(const std::string& name, int cin, int cout, InitContext& init) {
  Layer l;
  l.kind = LayerKind::kDense;
  l.name = name;
  l.weight = uniform_init({cin, cout}, cin, init.stream());
  l.bias = Tensor::zeros({cout}, true);
  return l;
}

}  // namespace detail

// One dense block: L units, each growing the channel count by the growth
// rate through a bottleneck conv pair. Returns the layers and c_out.
inline std::pair<std::vector<Layer>, int> build_dense_block(int c_in, int L, int k, int bottleneck,
                                                            const std::string& prefix,
                                                            detail::InitContext& init) {
  if (c_in < 1 || L < 1 || k < 1)
    fail(ErrorCode::kInvalidArgument, "build_dense_block: c_in, L, k must be >= 1");
  std::vector<Layer> out;
  int c = c_in;
  for (int u = 0; u < L; ++u) {
    std::string base = prefix + ".unit" + std::to_string(u + 1);
    Layer unit;
    unit.kind = LayerKind::kDenseUnit;
    unit.name = base;
    unit.sub.push_back(detail::make_bn(base + ".bn1", c, init));
    unit.sub.push_back(detail::make_relu(base + ".relu1"));
    unit.sub.push_back(detail::make_conv(base + ".conv1", c, bottleneck, 1, 1, 0, init));
    unit.sub.push_back(detail::make_bn(base + ".bn2", bottleneck, init));
    unit.sub.push_back(detail::make_relu(base + ".relu2"));
    unit.sub.push_back(detail::make_conv(base + ".conv2", bottleneck, k, 3, 1, 1, init));
    out.push_back(std::move(unit));
    c += k;
  }
  return {std::move(out), c};
}

// Transition: BN-ReLU-1x1 conv compressing channels by theta, then 2x2
// average pooling with stride 2.
inline std::pair<std::vector<Layer>, int> build_transition(int c_in, float theta,
                                                           const std::string& prefix,
                                                           detail::InitContext& init) {
  int c_out = static_cast<int>(theta * static_cast<float>(c_in));
  if (c_out < 1) fail(ErrorCode::kInvalidArgument, "build_transition: compression below 1 channel");
  std::vector<Layer> out;
  out.push_back(detail::make_bn(prefix + ".bn", c_in, init));
  out.push_back(detail::make_relu(prefix + ".relu"));
  out.push_back(detail::make_conv(prefix + ".conv", c_in, c_out, 1, 1, 0, init));
  Layer pool;
  pool.kind = LayerKind::kAvgPool;
  pool.name = prefix + ".pool";
  pool.pool_k = 2;
  pool.pool_stride = 2;
  pool.pool_pad = 0;
  out.push_back(std::move(pool));
  return {std::move(out), c_out};
}

// Backbone: 7x7/2 stem conv, 3x3/2 max pool, alternating dense blocks and
// transitions, final BN-ReLU, global average pooling. Records the
// channel/spatial trace of every stage in the model metadata.
inline ModelSpec build_backbone(const DenseNetConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelSpec m;
  m.seed = seed;
  m.input_c = cfg.input_c;
  m.input_h = cfg.input_h;
  m.input_w = cfg.input_w;
  detail::InitContext init{seed};

  int c = cfg.input_c, h = cfg.input_h, w = cfg.input_w;
  m.trace.push_back({"input", c, h, w});

  auto shrink = [](int extent, int k, int stride, int pad, const std::string& what) {
    int out = (extent + 2 * pad - k) / stride + 1;
    if (out < 1) fail(ErrorCode::kInvalidArgument, what + ": spatial size vanishes");
    return out;
  };

  m.layers.push_back(detail::make_conv("stem.conv", c, cfg.stem_channels, 7, 2, 3, init));
  c = cfg.stem_channels;
  h = shrink(h, 7, 2, 3, "stem.conv");
  w = shrink(w, 7, 2, 3, "stem.conv");
  m.trace.push_back({"stem_conv", c, h, w});

  Layer stem_pool;
  stem_pool.kind = LayerKind::kMaxPool;
  stem_pool.name = "stem.pool";
  stem_pool.pool_k = 3;
  stem_pool.pool_stride = 2;
  stem_pool.pool_pad = 1;
  m.layers.push_back(std::move(stem_pool));
  h = shrink(h, 3, 2, 1, "stem.pool");
  w = shrink(w, 3, 2, 1, "stem.pool");
  m.trace.push_back({"stem_pool", c, h, w});

  for (size_t b = 0; b < cfg.block_layers.size(); ++b) {
    std::string bname = "block" + std::to_string(b + 1);
    auto [block, c_out] =
        build_dense_block(c, cfg.block_layers[b], cfg.growth_rate, cfg.bottleneck_width, bname, init);
    for (Layer& l : block) m.layers.push_back(std::move(l));
    c = c_out;
    m.trace.push_back({bname, c, h, w});

    if (b + 1 < cfg.block_layers.size()) {
      if (h % 2 != 0 || w % 2 != 0)
        fail(ErrorCode::kInvalidArgument,
             "transition" + std::to_string(b + 1) + ": odd spatial size " + std::to_string(h) +
                 "x" + std::to_string(w) + " cannot halve");
      std::string tname = "transition" + std::to_string(b + 1);
      auto [trans, c_out2] = build_transition(c, cfg.compression, tname, init);
      for (Layer& l : trans) m.layers.push_back(std::move(l));
      c = c_out2;
      h /= 2;
      w /= 2;
      m.trace.push_back({tname, c, h, w});
    }
  }

  m.layers.push_back(detail::make_bn("final.bn", c, init));
  m.layers.push_back(detail::make_relu("final.relu"));
  Layer gap;
  gap.kind = LayerKind::kGlobalAvgPool;
  gap.name = "final.gap";
  m.layers.push_back(std::move(gap));
  m.trace.push_back({"gap", c, 1, 1});

  m.backbone_len = static_cast<int>(m.layers.size());
  return m;
}

// Head fragment on top of a GAP feature vector.
inline std::vector<Layer> build_head(int c_in, const HeadConfig& head, detail::InitContext& init) {
  head.validate();
  std::vector<Layer> out;
  std::vector<int> widths = head.dense_widths();
  int cin = c_in;
  for (size_t i = 0; i < widths.size(); ++i) {
    bool is_class_layer = i + 1 == widths.size();
    std::string base = "head.dense" + std::to_string(i + 1);
    out.push_back(detail::make_dense(base, cin, widths[i], init));
    cin = widths[i];
    if (!is_class_layer) {
      out.push_back(detail::make_relu(base + ".relu"));
      Layer drop;
      drop.kind = LayerKind::kDropout;
      drop.name = base + ".dropout";
      drop.rate = head.dropout_rate;
      out.push_back(std::move(drop));
    }
  }
  Layer sm;
  sm.kind = LayerKind::kSoftmax;
  sm.name = "head.softmax";
  out.push_back(std::move(sm));
  return out;
}

namespace detail {
inline void count_param_layers_rec(const Layer& l, int& n) {
  switch (l.kind) {
    case LayerKind::kConv2d:
    case LayerKind::kBatchNorm:
    case LayerKind::kDense:
      ++n;
      break;
    case LayerKind::kDenseUnit:
      for (const Layer& s : l.sub) count_param_layers_rec(s, n);
      break;
    default:
      break;
  }
}
}  // namespace detail

// Number of parameterized layers (conv/bn/dense), counting dense-unit
// members; defines the init-stream ordinal of the next appended layer.
inline int count_param_layers(const ModelSpec& m) {
  int n = 0;
  for (const Layer& l : m.layers) detail::count_param_layers_rec(l, n);
  return n;
}

// Backbone + head in one model. Head init streams continue the backbone's
// ordinal sequence.
inline ModelSpec build_model(const DenseNetConfig& cfg, const HeadConfig& head, uint64_t seed) {
  ModelSpec m = build_backbone(cfg, seed);
  detail::InitContext init{seed, count_param_layers(m)};
  int c_gap = m.trace.back().channels;
  for (Layer& l : build_head(c_gap, head, init)) m.layers.push_back(std::move(l));
  return m;
}

// Marks layers [first, last) untrainable; their parameters drop out of both
// gradient tracking and optimizer updates, and frozen BN stops adapting.
inline void freeze_base(ModelSpec& m, int first, int last) {
  if (m.layers.empty()) fail(ErrorCode::kInvalidArgument, "freeze_base: empty model");
  if (first < 0 || last > static_cast<int>(m.layers.size()) || first > last)
    fail(ErrorCode::kInvalidArgument, "freeze_base: bad layer range");
  for (int i = first; i < last; ++i) {
    Layer& l = m.layers[static_cast<size_t>(i)];
    l.trainable = false;
    visit_params(l, [](Layer& owner, Tensor& t, bool) {
      owner.trainable = false;
      t = t.with_requires_grad(false);
    });
  }
}

inline void freeze_backbone(ModelSpec& m) { freeze_base(m, 0, m.backbone_len); }

struct ParamCount {
  int64_t trainable = 0;
  int64_t total = 0;
};

inline ParamCount param_count(ModelSpec& m) {
  ParamCount pc;
  m.for_each_param([&pc](Layer& l, Tensor& t, bool is_stat) {
    pc.total += t.numel();
    if (l.trainable && !is_stat) pc.trainable += t.numel();
  });
  return pc;
}

// Channel trace per stage: stem conv, then each block and transition.
inline std::vector<int> channel_trace(const ModelSpec& m) {
  std::vector<int> out;
  for (const StageShape& s : m.trace) {
    if (s.label == "stem_conv" || s.label.rfind("block", 0) == 0 ||
        s.label.rfind("transition", 0) == 0)
      out.push_back(s.channels);
  }
  return out;
}

// Spatial trace: input extent plus every stage where it changed.
inline std::vector<int> spatial_trace(const ModelSpec& m) {
  std::vector<int> out;
  for (const StageShape& s : m.trace) {
    if (s.label == "gap") continue;
    if (out.empty() || s.height != out.back()) out.push_back(s.height);
  }
  return out;
}

}  // namespace dgm
