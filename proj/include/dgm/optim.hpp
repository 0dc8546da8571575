#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dgm/tensor.hpp"

namespace dgm {

enum class OptKind { kAdam, kSgd, kRmsprop };

inline const char* opt_kind_name(OptKind k) {
  switch (k) {
    case OptKind::kAdam: return "adam";
    case OptKind::kSgd: return "sgd";
    case OptKind::kRmsprop: return "rmsprop";
  }
  return "?";
}

inline OptKind opt_kind_from_name(const std::string& s) {
  if (s == "adam") return OptKind::kAdam;
  if (s == "sgd") return OptKind::kSgd;
  if (s == "rmsprop") return OptKind::kRmsprop;
  fail(ErrorCode::kInvalidArgument, "unknown optimizer '" + s + "'");
}

// Update-rule hyperparameters. Defaults are verified against the scalar
// quadratic simulation: each kind reaches |x-3| < 1e-3 from 0 within 500
// steps on f(x) = (x-3)^2.
struct OptimizerHyper {
  OptKind kind = OptKind::kAdam;
  float learning_rate = 0.03f;
  float beta1 = 0.9f, beta2 = 0.999f;  // adam
  float momentum = 0.9f;               // sgd
  float rho = 0.9f;                    // rmsprop
  float epsilon = 1e-7f;

  static OptimizerHyper adam(float lr = 0.03f) {
    OptimizerHyper h;
    h.kind = OptKind::kAdam;
    h.learning_rate = lr;
    return h;
  }

  static OptimizerHyper sgd(float lr = 0.01f, float momentum = 0.9f) {
    OptimizerHyper h;
    h.kind = OptKind::kSgd;
    h.learning_rate = lr;
    h.momentum = momentum;
    return h;
  }

  static OptimizerHyper rmsprop(float lr = 0.01f) {
    OptimizerHyper h;
    h.kind = OptKind::kRmsprop;
    h.learning_rate = lr;
    return h;
  }

  static OptimizerHyper defaults_for(OptKind k) {
    switch (k) {
      case OptKind::kAdam: return adam();
      case OptKind::kSgd: return sgd();
      case OptKind::kRmsprop: return rmsprop();
    }
    return adam();
  }

  void validate() const {
    if (!(learning_rate > 0.0f))
      fail(ErrorCode::kInvalidArgument, "optimizer: learning_rate must be > 0");
    if (!(epsilon > 0.0f)) fail(ErrorCode::kInvalidArgument, "optimizer: epsilon must be > 0");
    if (kind == OptKind::kAdam && (beta1 <= 0.0f || beta1 >= 1.0f || beta2 <= 0.0f || beta2 >= 1.0f))
      fail(ErrorCode::kInvalidArgument, "optimizer: adam betas must be in (0,1)");
    if (kind == OptKind::kSgd && (momentum < 0.0f || momentum >= 1.0f))
      fail(ErrorCode::kInvalidArgument, "optimizer: sgd momentum must be in [0,1)");
    if (kind == OptKind::kRmsprop && (rho <= 0.0f || rho >= 1.0f))
      fail(ErrorCode::kInvalidArgument, "optimizer: rmsprop rho must be in (0,1)");
  }
};

// Per-parameter moment buffers plus the shared step counter. Buffer use by
// kind: adam keeps first moments in m and second moments in v; sgd keeps its
// velocity in m; rmsprop keeps the squared-gradient EMA in v.
struct OptimizerState {
  OptimizerHyper hyper;
  int64_t t = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline OptimizerState init_state(const std::vector<Tensor*>& params, const OptimizerHyper& hyper) {
  hyper.validate();
  if (params.empty()) fail(ErrorCode::kInvalidArgument, "optimizer: no parameters");
  OptimizerState st;
  st.hyper = hyper;
  for (const Tensor* p : params) {
    st.m.push_back(Tensor::zeros(p->shape()));
    st.v.push_back(Tensor::zeros(p->shape()));
  }
  return st;
}

// One update over all parameters; t increments once per call. Parameters
// are replaced functionally so older tensors sharing the storage stay valid.
inline void step(OptimizerState& st, const std::vector<Tensor*>& params,
                 const std::vector<Tensor>& grads) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    fail(ErrorCode::kShapeMismatch, "optimizer step: parameter/gradient count mismatch");
  const OptimizerHyper& h = st.hyper;
  st.t += 1;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = grads[i];
    if (!p.same_shape(g))
      fail(ErrorCode::kShapeMismatch,
           "optimizer step: grad shape " + shape_str(g.shape()) + " != param shape " +
               shape_str(p.shape()));
    Tensor updated = Tensor::zeros(p.shape());
    float* out = updated.mutable_data();
    const float* pv = p.data();
    const float* gv = g.data();
    int64_t n = p.numel();

    switch (h.kind) {
      case OptKind::kSgd: {
        Tensor vel = Tensor::zeros(p.shape());
        float* mv = vel.mutable_data();
        const float* mo = st.m[i].data();
        for (int64_t j = 0; j < n; ++j) {
          mv[j] = h.momentum * mo[j] + gv[j];
          out[j] = pv[j] - h.learning_rate * mv[j];
        }
        st.m[i] = vel;
        break;
      }
      case OptKind::kRmsprop: {
        Tensor ema = Tensor::zeros(p.shape());
        float* sv = ema.mutable_data();
        const float* so = st.v[i].data();
        for (int64_t j = 0; j < n; ++j) {
          sv[j] = h.rho * so[j] + (1.0f - h.rho) * gv[j] * gv[j];
          out[j] = pv[j] - h.learning_rate * gv[j] / (std::sqrt(sv[j]) + h.epsilon);
        }
        st.v[i] = ema;
        break;
      }
      case OptKind::kAdam: {
        Tensor m1 = Tensor::zeros(p.shape());
        Tensor m2 = Tensor::zeros(p.shape());
        float* m1v = m1.mutable_data();
        float* m2v = m2.mutable_data();
        const float* m1o = st.m[i].data();
        const float* m2o = st.v[i].data();
        float c1 = 1.0f - std::pow(h.beta1, static_cast<float>(st.t));
        float c2 = 1.0f - std::pow(h.beta2, static_cast<float>(st.t));
        for (int64_t j = 0; j < n; ++j) {
          m1v[j] = h.beta1 * m1o[j] + (1.0f - h.beta1) * gv[j];
          m2v[j] = h.beta2 * m2o[j] + (1.0f - h.beta2) * gv[j] * gv[j];
          float mhat = m1v[j] / c1;
          float vhat = m2v[j] / c2;
          out[j] = pv[j] - h.learning_rate * mhat / (std::sqrt(vhat) + h.epsilon);
        }
        st.m[i] = m1;
        st.v[i] = m2;
        break;
      }
    }
    p = updated.with_requires_grad(p.requires_grad());
  }
}

}  // namespace dgm
