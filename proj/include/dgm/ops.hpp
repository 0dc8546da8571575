#pragma once

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "dgm/tape.hpp"
#include "dgm/tensor.hpp"

namespace dgm {
namespace detail {

// Resolves the tape ids of an op's inputs. Tensors already on the tape keep
// their node; requires_grad tensors not yet seen become leaves; everything
// else is a constant (-1). Returns true when the op has to be recorded.
inline bool resolve_inputs(Tape* tape, std::initializer_list<const Tensor*> inputs,
                           std::vector<int>& ids) {
  ids.clear();
  if (!tape) return false;
  bool tracked = false;
  for (const Tensor* t : inputs) {
    int id = tape->node_of(*t);
    if (id < 0 && t->requires_grad()) id = tape->leaf(*t);
    ids.push_back(id);
    tracked |= id >= 0;
  }
  return tracked;
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    fail(ErrorCode::kShapeMismatch,
         std::string(op) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
}

}  // namespace detail

inline Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  detail::check_same_shape("add", a, b);
  Tensor out = Tensor::zeros(a.shape());
  float* o = out.mutable_data();
  const float *pa = a.data(), *pb = b.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] = pa[i] + pb[i];
  check_finite("add", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a, &b}, ids)) {
    out = out.with_requires_grad(true);
    tape->record("add", out, ids, [](const Tensor& g) {
      return std::vector<Tensor>{g, g};
    });
  }
  return out;
}

inline Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
  detail::check_same_shape("sub", a, b);
  Tensor out = Tensor::zeros(a.shape());
  float* o = out.mutable_data();
  const float *pa = a.data(), *pb = b.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] = pa[i] - pb[i];
  check_finite("sub", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a, &b}, ids)) {
    out = out.with_requires_grad(true);
    tape->record("sub", out, ids, [](const Tensor& g) {
      Tensor neg = Tensor::zeros(g.shape());
      float* n = neg.mutable_data();
      const float* pg = g.data();
      for (int64_t i = 0; i < g.numel(); ++i) n[i] = -pg[i];
      return std::vector<Tensor>{g, neg};
    });
  }
  return out;
}

inline Tensor mul(Tape* tape, const Tensor& a, const Tensor& b) {
  detail::check_same_shape("mul_elementwise", a, b);
  Tensor out = Tensor::zeros(a.shape());
  float* o = out.mutable_data();
  const float *pa = a.data(), *pb = b.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] = pa[i] * pb[i];
  check_finite("mul_elementwise", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a, &b}, ids)) {
    out = out.with_requires_grad(true);
    tape->record("mul_elementwise", out, ids, [a, b](const Tensor& g) {
      Tensor ga = Tensor::zeros(a.shape());
      Tensor gb = Tensor::zeros(b.shape());
      float *qa = ga.mutable_data(), *qb = gb.mutable_data();
      const float *pg = g.data(), *pa = a.data(), *pb = b.data();
      for (int64_t i = 0; i < g.numel(); ++i) {
        qa[i] = pg[i] * pb[i];
        qb[i] = pg[i] * pa[i];
      }
      return std::vector<Tensor>{ga, gb};
    });
  }
  return out;
}

inline Tensor scalar_mul(Tape* tape, const Tensor& a, float s) {
  Tensor out = Tensor::zeros(a.shape());
  float* o = out.mutable_data();
  const float* pa = a.data();
  for (int64_t i = 0; i < out.numel(); ++i) o[i] = pa[i] * s;
  check_finite("scalar_mul", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a}, ids)) {
    out = out.with_requires_grad(true);
    tape->record("scalar_mul", out, ids, [s](const Tensor& g) {
      Tensor ga = Tensor::zeros(g.shape());
      float* q = ga.mutable_data();
      const float* pg = g.data();
      for (int64_t i = 0; i < g.numel(); ++i) q[i] = pg[i] * s;
      return std::vector<Tensor>{ga};
    });
  }
  return out;
}

namespace detail {

// C[m x n] = A[m x k] * B[k x n], row major. ikj order so the inner loop
// streams the row accumulator and B. Dot products accumulate in double and
// round once on store, keeping forward values accurate enough for the
// eps=1e-3 finite-difference checks.
inline void matmul_raw(const float* a, const float* b, float* c, int m, int k, int n) {
  std::vector<double> acc(static_cast<size_t>(n));
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<int64_t>(i) * k;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int l = 0; l < k; ++l) {
      double av = arow[l];
      if (av == 0.0) continue;
      const float* brow = b + static_cast<int64_t>(l) * n;
      for (int j = 0; j < n; ++j) acc[static_cast<size_t>(j)] += av * brow[j];
    }
    float* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = static_cast<float>(acc[static_cast<size_t>(j)]);
  }
}

// C[m x n] = A^T[m x k] * B[k x n] where A is stored [k x m].
inline void matmul_at_b(const float* a, const float* b, float* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(float) * static_cast<size_t>(m) * static_cast<size_t>(n));
  for (int l = 0; l < k; ++l) {
    const float* arow = a + static_cast<int64_t>(l) * m;
    const float* brow = b + static_cast<int64_t>(l) * n;
    for (int i = 0; i < m; ++i) {
      float av = arow[i];
      if (av == 0.0f) continue;
      float* crow = c + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m x n] = A[m x k] * B^T[k x n] where B is stored [n x k].
inline void matmul_a_bt(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<int64_t>(i) * k;
    float* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const float* brow = b + static_cast<int64_t>(j) * k;
      float acc = 0.0f;
      for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
      crow[j] = acc;
    }
  }
}

}  // namespace detail

inline Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    fail(ErrorCode::kShapeMismatch,
         "matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  detail::matmul_raw(a.data(), b.data(), out.mutable_data(), m, k, n);
  check_finite("matmul", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a, &b}, ids)) {
    bool need_a = ids[0] >= 0, need_b = ids[1] >= 0;
    out = out.with_requires_grad(true);
    tape->record("matmul", out, ids, [a, b, m, k, n, need_a, need_b](const Tensor& g) {
      std::vector<Tensor> grads(2);
      if (need_a) {
        Tensor ga = Tensor::zeros({m, k});
        detail::matmul_a_bt(g.data(), b.data(), ga.mutable_data(), m, n, k);
        grads[0] = ga;
      }
      if (need_b) {
        Tensor gb = Tensor::zeros({k, n});
        detail::matmul_at_b(a.data(), g.data(), gb.mutable_data(), k, m, n);
        grads[1] = gb;
      }
      return grads;
    });
  }
  return out;
}

inline Tensor reshape(Tape* tape, const Tensor& a, Shape new_shape) {
  Tensor out = a.reshaped_view(new_shape).clone().with_requires_grad(false);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a}, ids)) {
    Shape old_shape = a.shape();
    out = out.with_requires_grad(true);
    tape->record("reshape", out, ids, [old_shape](const Tensor& g) {
      return std::vector<Tensor>{g.reshaped_view(old_shape)};
    });
  }
  return out;
}

inline Tensor reduce_sum(Tape* tape, const Tensor& a) {
  double acc = 0.0;
  const float* pa = a.data();
  for (int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
  Tensor out = Tensor::scalar_of(static_cast<float>(acc)).with_scalar_shadow(acc);
  check_finite("reduce_sum", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a}, ids)) {
    Shape shape = a.shape();
    out = out.with_requires_grad(true);
    tape->record("reduce_sum", out, ids, [shape](const Tensor& g) {
      return std::vector<Tensor>{Tensor::full(shape, g.scalar())};
    });
  }
  return out;
}

inline Tensor reduce_mean(Tape* tape, const Tensor& a) {
  double acc = 0.0;
  const float* pa = a.data();
  for (int64_t i = 0; i < a.numel(); ++i) acc += pa[i];
  double mean = acc / static_cast<double>(a.numel());
  Tensor out = Tensor::scalar_of(static_cast<float>(mean)).with_scalar_shadow(mean);
  check_finite("reduce_mean", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&a}, ids)) {
    Shape shape = a.shape();
    float inv = 1.0f / static_cast<float>(a.numel());
    out = out.with_requires_grad(true);
    tape->record("reduce_mean", out, ids, [shape, inv](const Tensor& g) {
      return std::vector<Tensor>{Tensor::full(shape, g.scalar() * inv)};
    });
  }
  return out;
}

// Concatenation along the channel axis of NCHW tensors. Inputs must agree on
// every axis except channels.
inline Tensor concat_channels(Tape* tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) fail(ErrorCode::kInvalidArgument, "concat_channels: no inputs");
  const Tensor& first = xs[0];
  if (first.ndim() != 4)
    fail(ErrorCode::kShapeMismatch, "concat_channels expects NCHW, got " + shape_str(first.shape()));
  int n = first.dim(0), h = first.dim(2), w = first.dim(3);
  int c_total = 0;
  for (const Tensor& x : xs) {
    if (x.ndim() != 4 || x.dim(0) != n || x.dim(2) != h || x.dim(3) != w)
      fail(ErrorCode::kShapeMismatch,
           "concat_channels: " + shape_str(x.shape()) + " incompatible with " + shape_str(first.shape()));
    c_total += x.dim(1);
  }
  Tensor out = Tensor::zeros({n, c_total, h, w});
  float* o = out.mutable_data();
  int64_t plane = static_cast<int64_t>(h) * w;
  for (int ni = 0; ni < n; ++ni) {
    int64_t dst_c = 0;
    for (const Tensor& x : xs) {
      int cx = x.dim(1);
      const float* src = x.data() + static_cast<int64_t>(ni) * cx * plane;
      std::memcpy(o + (static_cast<int64_t>(ni) * c_total + dst_c) * plane, src,
                  sizeof(float) * static_cast<size_t>(cx) * static_cast<size_t>(plane));
      dst_c += cx;
    }
  }

  std::vector<const Tensor*> ptrs;
  for (const Tensor& x : xs) ptrs.push_back(&x);
  std::vector<int> ids;
  bool tracked = false;
  if (tape) {
    for (const Tensor* t : ptrs) {
      int id = tape->node_of(*t);
      if (id < 0 && t->requires_grad()) id = tape->leaf(*t);
      ids.push_back(id);
      tracked |= id >= 0;
    }
  }
  if (tracked) {
    std::vector<int> channels;
    for (const Tensor& x : xs) channels.push_back(x.dim(1));
    out = out.with_requires_grad(true);
    tape->record("concat_channels", out, ids, [n, h, w, c_total, channels](const Tensor& g) {
      std::vector<Tensor> grads;
      int64_t plane = static_cast<int64_t>(h) * w;
      int64_t src_c = 0;
      const float* pg = g.data();
      for (int cx : channels) {
        Tensor gx = Tensor::zeros({n, cx, h, w});
        float* q = gx.mutable_data();
        for (int ni = 0; ni < n; ++ni) {
          std::memcpy(q + static_cast<int64_t>(ni) * cx * plane,
                      pg + (static_cast<int64_t>(ni) * c_total + src_c) * plane,
                      sizeof(float) * static_cast<size_t>(cx) * static_cast<size_t>(plane));
        }
        src_c += cx;
        grads.push_back(gx);
      }
      return grads;
    });
  }
  return out;
}

// Channel slice [c0, c1) of an NCHW tensor; inverse of concat_channels.
// Not differentiable (used by tests and inference-side plumbing only).
inline Tensor slice_channels(const Tensor& x, int c0, int c1) {
  if (x.ndim() != 4 || c0 < 0 || c1 > x.dim(1) || c0 >= c1)
    fail(ErrorCode::kInvalidArgument, "slice_channels: bad range");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor out = Tensor::zeros({n, c1 - c0, h, w});
  int64_t plane = static_cast<int64_t>(h) * w;
  float* o = out.mutable_data();
  for (int ni = 0; ni < n; ++ni)
    std::memcpy(o + static_cast<int64_t>(ni) * (c1 - c0) * plane,
                x.data() + (static_cast<int64_t>(ni) * c + c0) * plane,
                sizeof(float) * static_cast<size_t>(c1 - c0) * static_cast<size_t>(plane));
  return out;
}

}  // namespace dgm
