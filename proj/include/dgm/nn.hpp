#pragma once

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "dgm/ops.hpp"
#include "dgm/rng.hpp"
#include "dgm/tape.hpp"
#include "dgm/tensor.hpp"

namespace dgm {

enum class Mode { kTrain, kEval };

namespace detail {

inline int conv_out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// Scatters x[c x h x w] into cols[(c*kh*kw) x (oh*ow)]; zero padding.
inline void im2col(const float* x, int c, int h, int w, int kh, int kw, int stride, int pad,
                   int oh, int ow, float* cols) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        float* row = cols + (static_cast<int64_t>(ci) * kh * kw + ki * kw + kj) *
                                (static_cast<int64_t>(oh) * ow);
        for (int oi = 0; oi < oh; ++oi) {
          int ii = oi * stride + ki - pad;
          for (int oj = 0; oj < ow; ++oj) {
            int ij = oj * stride + kj - pad;
            float v = 0.0f;
            if (ii >= 0 && ii < h && ij >= 0 && ij < w)
              v = x[(static_cast<int64_t>(ci) * h + ii) * w + ij];
            row[static_cast<int64_t>(oi) * ow + oj] = v;
          }
        }
      }
    }
  }
}

// Adds cols back into x (transpose of im2col); overlapping taps accumulate.
inline void col2im(const float* cols, int c, int h, int w, int kh, int kw, int stride, int pad,
                   int oh, int ow, float* x) {
  for (int ci = 0; ci < c; ++ci) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const float* row = cols + (static_cast<int64_t>(ci) * kh * kw + ki * kw + kj) *
                                      (static_cast<int64_t>(oh) * ow);
        for (int oi = 0; oi < oh; ++oi) {
          int ii = oi * stride + ki - pad;
          if (ii < 0 || ii >= h) continue;
          for (int oj = 0; oj < ow; ++oj) {
            int ij = oj * stride + kj - pad;
            if (ij < 0 || ij >= w) continue;
            x[(static_cast<int64_t>(ci) * h + ii) * w + ij] += row[static_cast<int64_t>(oi) * ow + oj];
          }
        }
      }
    }
  }
}

}  // namespace detail

// 2-D convolution, NCHW, bias-free, zero padding, square stride/pad.
// Forward is explicit im2col + matmul; the backward reuses col2im.
inline Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.ndim() != 4 || w.ndim() != 4)
    fail(ErrorCode::kShapeMismatch, "conv2d expects NCHW input and OIHW weight");
  if (x.dim(1) != w.dim(1))
    fail(ErrorCode::kShapeMismatch,
         "conv2d: input channels " + std::to_string(x.dim(1)) + " != weight channels " +
             std::to_string(w.dim(1)));
  if (stride < 1 || pad < 0) fail(ErrorCode::kInvalidArgument, "conv2d: bad stride/pad");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  int cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (kh > h + 2 * pad || kw > wd + 2 * pad)
    fail(ErrorCode::kShapeMismatch, "conv2d: kernel larger than padded input");
  int oh = detail::conv_out_extent(h, kh, stride, pad);
  int ow = detail::conv_out_extent(wd, kw, stride, pad);
  int ck = c * kh * kw;

  Tensor out = Tensor::zeros({n, cout, oh, ow});
  std::vector<float> cols(static_cast<size_t>(ck) * oh * ow);
  for (int ni = 0; ni < n; ++ni) {
    detail::im2col(x.data() + static_cast<int64_t>(ni) * c * h * wd, c, h, wd, kh, kw, stride, pad,
                   oh, ow, cols.data());
    detail::matmul_raw(w.data(), cols.data(),
                       out.mutable_data() + static_cast<int64_t>(ni) * cout * oh * ow, cout, ck,
                       oh * ow);
  }
  check_finite("conv2d", out);

  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&x, &w}, ids)) {
    bool need_x = ids[0] >= 0, need_w = ids[1] >= 0;
    out = out.with_requires_grad(true);
    tape->record("conv2d", out, ids,
                 [x, w, stride, pad, n, c, h, wd, cout, kh, kw, oh, ow, ck, need_x,
                  need_w](const Tensor& g) {
      std::vector<Tensor> grads(2);
      Tensor gx, gw;
      if (need_x) gx = Tensor::zeros(x.shape());
      if (need_w) gw = Tensor::zeros(w.shape());
      std::vector<float> cols(static_cast<size_t>(ck) * oh * ow);
      std::vector<float> gcols(static_cast<size_t>(ck) * oh * ow);
      for (int ni = 0; ni < n; ++ni) {
        const float* gout = g.data() + static_cast<int64_t>(ni) * cout * oh * ow;
        if (need_w) {
          detail::im2col(x.data() + static_cast<int64_t>(ni) * c * h * wd, c, h, wd, kh, kw,
                         stride, pad, oh, ow, cols.data());
          // gw += gout * cols^T, accumulated across the batch
          for (int i = 0; i < cout; ++i) {
            const float* grow = gout + static_cast<int64_t>(i) * oh * ow;
            float* wrow = gw.mutable_data() + static_cast<int64_t>(i) * ck;
            for (int j = 0; j < ck; ++j) {
              const float* crow = cols.data() + static_cast<int64_t>(j) * oh * ow;
              float acc = 0.0f;
              for (int p = 0; p < oh * ow; ++p) acc += grow[p] * crow[p];
              wrow[j] += acc;
            }
          }
        }
        if (need_x) {
          detail::matmul_at_b(w.data(), gout, gcols.data(), ck, cout, oh * ow);
          detail::col2im(gcols.data(), c, h, wd, kh, kw, stride, pad, oh, ow,
                         gx.mutable_data() + static_cast<int64_t>(ni) * c * h * wd);
        }
      }
      if (need_x) grads[0] = gx;
      if (need_w) grads[1] = gw;
      return grads;
    });
  }
  return out;
}

// Per-channel affine normalization state. Running statistics follow an
// exponential moving average: running = (1-momentum)*running + momentum*batch.
struct BatchNormState {
  Tensor gamma, beta;
  Tensor running_mean, running_var;
  float momentum = 0.1f;
  float epsilon = 1e-5f;

  static BatchNormState make(int channels, float momentum = 0.1f, float epsilon = 1e-5f) {
    if (channels < 1) fail(ErrorCode::kInvalidArgument, "batch_norm: channels must be positive");
    if (momentum <= 0.0f || momentum >= 1.0f)
      fail(ErrorCode::kInvalidArgument, "batch_norm: momentum must be in (0,1)");
    if (epsilon <= 0.0f) fail(ErrorCode::kInvalidArgument, "batch_norm: epsilon must be positive");
    BatchNormState s;
    s.gamma = Tensor::full({channels}, 1.0f, true);
    s.beta = Tensor::zeros({channels}, true);
    s.running_mean = Tensor::zeros({channels});
    s.running_var = Tensor::full({channels}, 1.0f);
    s.momentum = momentum;
    s.epsilon = epsilon;
    return s;
  }

  int channels() const { return gamma.dim(0); }
};

// Batch normalization over (N,H,W) per channel. Train mode normalizes with
// batch statistics (biased variance) and updates the running EMA; eval mode
// normalizes with the running statistics and mutates nothing.
inline Tensor batch_norm(Tape* tape, const Tensor& x, BatchNormState& state, Mode mode) {
  if (x.ndim() != 4) fail(ErrorCode::kShapeMismatch, "batch_norm expects NCHW");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (c != state.channels())
    fail(ErrorCode::kShapeMismatch, "batch_norm: channel count mismatch");
  int64_t m = static_cast<int64_t>(n) * h * w;  // samples per channel
  if (mode == Mode::kTrain && m < 2)
    fail(ErrorCode::kInvalidArgument, "batch_norm train mode needs at least 2 values per channel");

  int64_t plane = static_cast<int64_t>(h) * w;
  std::vector<float> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
  if (mode == Mode::kTrain) {
    for (int ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const float* p = x.data() + (static_cast<int64_t>(ni) * c + ci) * plane;
        for (int64_t i = 0; i < plane; ++i) acc += p[i];
      }
      double mu = acc / static_cast<double>(m);
      double vacc = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const float* p = x.data() + (static_cast<int64_t>(ni) * c + ci) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          double d = p[i] - mu;
          vacc += d * d;
        }
      }
      mean[static_cast<size_t>(ci)] = static_cast<float>(mu);
      var[static_cast<size_t>(ci)] = static_cast<float>(vacc / static_cast<double>(m));
    }
    // EMA update of running stats; not part of the differentiable graph.
    Tensor rm = Tensor::zeros({c}), rv = Tensor::zeros({c});
    for (int ci = 0; ci < c; ++ci) {
      rm.mutable_data()[ci] = (1.0f - state.momentum) * state.running_mean.data()[ci] +
                              state.momentum * mean[static_cast<size_t>(ci)];
      rv.mutable_data()[ci] = (1.0f - state.momentum) * state.running_var.data()[ci] +
                              state.momentum * var[static_cast<size_t>(ci)];
    }
    state.running_mean = rm;
    state.running_var = rv;
  } else {
    for (int ci = 0; ci < c; ++ci) {
      mean[static_cast<size_t>(ci)] = state.running_mean.data()[ci];
      var[static_cast<size_t>(ci)] = state.running_var.data()[ci];
    }
  }

  Tensor out = Tensor::zeros(x.shape());
  std::vector<float> inv_std(static_cast<size_t>(c));
  for (int ci = 0; ci < c; ++ci)
    inv_std[static_cast<size_t>(ci)] =
        1.0f / std::sqrt(var[static_cast<size_t>(ci)] + state.epsilon);
  {
    float* o = out.mutable_data();
    const float* px = x.data();
    const float* pg = state.gamma.data();
    const float* pb = state.beta.data();
    for (int ni = 0; ni < n; ++ni) {
      for (int ci = 0; ci < c; ++ci) {
        int64_t base = (static_cast<int64_t>(ni) * c + ci) * plane;
        float mu = mean[static_cast<size_t>(ci)];
        float is = inv_std[static_cast<size_t>(ci)];
        float ga = pg[ci], be = pb[ci];
        for (int64_t i = 0; i < plane; ++i) o[base + i] = ga * (px[base + i] - mu) * is + be;
      }
    }
  }
  check_finite("batch_norm", out);

  Tensor gamma = state.gamma, beta = state.beta;
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&x, &gamma, &beta}, ids)) {
    bool need_x = ids[0] >= 0, need_g = ids[1] >= 0, need_b = ids[2] >= 0;
    bool train = mode == Mode::kTrain;
    out = out.with_requires_grad(true);
    tape->record("batch_norm", out, ids,
                 [x, gamma, mean, inv_std, n, c, plane, m, train, need_x, need_g,
                  need_b](const Tensor& g) {
      std::vector<Tensor> grads(3);
      Tensor gx, gg, gb;
      if (need_x) gx = Tensor::zeros(x.shape());
      if (need_g) gg = Tensor::zeros(gamma.shape());
      if (need_b) gb = Tensor::zeros(gamma.shape());
      const float* px = x.data();
      const float* pg = g.data();
      for (int ci = 0; ci < c; ++ci) {
        float mu = mean[static_cast<size_t>(ci)];
        float is = inv_std[static_cast<size_t>(ci)];
        float ga = gamma.data()[ci];
        // Per-channel reductions of dy and dy*xhat.
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int ni = 0; ni < n; ++ni) {
          int64_t base = (static_cast<int64_t>(ni) * c + ci) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            float xhat = (px[base + i] - mu) * is;
            sum_dy += pg[base + i];
            sum_dy_xhat += static_cast<double>(pg[base + i]) * xhat;
          }
        }
        if (need_g) gg.mutable_data()[ci] = static_cast<float>(sum_dy_xhat);
        if (need_b) gb.mutable_data()[ci] = static_cast<float>(sum_dy);
        if (need_x) {
          if (train) {
            // dx = gamma*is/m * (m*dy - sum(dy) - xhat*sum(dy*xhat))
            float k1 = ga * is;
            float inv_m = 1.0f / static_cast<float>(m);
            for (int ni = 0; ni < n; ++ni) {
              int64_t base = (static_cast<int64_t>(ni) * c + ci) * plane;
              for (int64_t i = 0; i < plane; ++i) {
                float xhat = (px[base + i] - mu) * is;
                gx.mutable_data()[base + i] =
                    k1 * (pg[base + i] - inv_m * (static_cast<float>(sum_dy) +
                                                  xhat * static_cast<float>(sum_dy_xhat)));
              }
            }
          } else {
            float k1 = ga * is;  // running stats are constants in eval mode
            for (int ni = 0; ni < n; ++ni) {
              int64_t base = (static_cast<int64_t>(ni) * c + ci) * plane;
              for (int64_t i = 0; i < plane; ++i)
                gx.mutable_data()[base + i] = k1 * pg[base + i];
            }
          }
        }
      }
      if (need_x) grads[0] = gx;
      if (need_g) grads[1] = gg;
      if (need_b) grads[2] = gb;
      return grads;
    });
  }
  return out;
}

inline Tensor relu(Tape* tape, const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  float* o = out.mutable_data();
  const float* p = x.data();
  for (int64_t i = 0; i < x.numel(); ++i) o[i] = p[i] > 0.0f ? p[i] : 0.0f;
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&x}, ids)) {
    out = out.with_requires_grad(true);
    // Subgradient at 0 is 0.
    tape->record("relu", out, ids, [x](const Tensor& g) {
      Tensor gx = Tensor::zeros(x.shape());
      float* q = gx.mutable_data();
      const float *pg = g.data(), *px = x.data();
      for (int64_t i = 0; i < x.numel(); ++i) q[i] = px[i] > 0.0f ? pg[i] : 0.0f;
      return std::vector<Tensor>{gx};
    });
  }
  return out;
}

enum class PoolKind { kMax, kAvg };

// Window pooling. Average pooling counts padded cells as zeros (divides by
// k*k); max pooling ignores them and routes the gradient to the first
// maximum in scan order.
inline Tensor pool2d(Tape* tape, const Tensor& x, PoolKind kind, int k, int stride, int pad = 0) {
  if (x.ndim() != 4) fail(ErrorCode::kShapeMismatch, "pool2d expects NCHW");
  if (k < 1 || stride < 1 || pad < 0 || pad >= k)
    fail(ErrorCode::kInvalidArgument, "pool2d: bad kernel/stride/pad");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (k > h + 2 * pad || k > w + 2 * pad)
    fail(ErrorCode::kShapeMismatch, "pool2d: window exceeds padded input");
  int oh = detail::conv_out_extent(h, k, stride, pad);
  int ow = detail::conv_out_extent(w, k, stride, pad);

  Tensor out = Tensor::zeros({n, c, oh, ow});
  std::vector<int32_t> argmax;
  if (kind == PoolKind::kMax) argmax.resize(static_cast<size_t>(out.numel()));
  float* o = out.mutable_data();
  const float* px = x.data();
  float inv_area = 1.0f / static_cast<float>(k * k);
  int64_t oidx = 0;
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* plane = px + (static_cast<int64_t>(ni) * c + ci) * h * w;
      for (int oi = 0; oi < oh; ++oi) {
        for (int oj = 0; oj < ow; ++oj, ++oidx) {
          int i0 = oi * stride - pad, j0 = oj * stride - pad;
          if (kind == PoolKind::kMax) {
            float best = -std::numeric_limits<float>::infinity();
            int32_t best_at = -1;
            for (int ki = 0; ki < k; ++ki) {
              int ii = i0 + ki;
              if (ii < 0 || ii >= h) continue;
              for (int kj = 0; kj < k; ++kj) {
                int jj = j0 + kj;
                if (jj < 0 || jj >= w) continue;
                float v = plane[static_cast<int64_t>(ii) * w + jj];
                if (v > best) {
                  best = v;
                  best_at = static_cast<int32_t>(ii * w + jj);
                }
              }
            }
            o[oidx] = best;
            argmax[static_cast<size_t>(oidx)] = best_at;
          } else {
            double acc = 0.0;
            for (int ki = 0; ki < k; ++ki) {
              int ii = i0 + ki;
              if (ii < 0 || ii >= h) continue;
              for (int kj = 0; kj < k; ++kj) {
                int jj = j0 + kj;
                if (jj < 0 || jj >= w) continue;
                acc += plane[static_cast<int64_t>(ii) * w + jj];
              }
            }
            o[oidx] = static_cast<float>(acc) * inv_area;
          }
        }
      }
    }
  }
  check_finite("pool2d", out);

  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&x}, ids)) {
    Shape xshape = x.shape();
    out = out.with_requires_grad(true);
    if (kind == PoolKind::kMax) {
      tape->record("max_pool2d", out, ids, [xshape, argmax, n, c, h, w, oh, ow](const Tensor& g) {
        Tensor gx = Tensor::zeros(xshape);
        float* q = gx.mutable_data();
        const float* pg = g.data();
        int64_t oidx = 0;
        for (int ni = 0; ni < n; ++ni) {
          for (int ci = 0; ci < c; ++ci) {
            float* plane = q + (static_cast<int64_t>(ni) * c + ci) * h * w;
            for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i, ++oidx) {
              int32_t at = argmax[static_cast<size_t>(oidx)];
              if (at >= 0) plane[at] += pg[oidx];
            }
          }
        }
        return std::vector<Tensor>{gx};
      });
    } else {
      int kk = k, ss = stride, pp = pad;
      tape->record("avg_pool2d", out, ids,
                   [xshape, n, c, h, w, oh, ow, kk, ss, pp, inv_area](const Tensor& g) {
        Tensor gx = Tensor::zeros(xshape);
        float* q = gx.mutable_data();
        const float* pg = g.data();
        int64_t oidx = 0;
        for (int ni = 0; ni < n; ++ni) {
          for (int ci = 0; ci < c; ++ci) {
            float* plane = q + (static_cast<int64_t>(ni) * c + ci) * h * w;
            for (int oi = 0; oi < oh; ++oi) {
              for (int oj = 0; oj < ow; ++oj, ++oidx) {
                float gv = pg[oidx] * inv_area;
                int i0 = oi * ss - pp, j0 = oj * ss - pp;
                for (int ki = 0; ki < kk; ++ki) {
                  int ii = i0 + ki;
                  if (ii < 0 || ii >= h) continue;
                  for (int kj = 0; kj < kk; ++kj) {
                    int jj = j0 + kj;
                    if (jj < 0 || jj >= w) continue;
                    plane[static_cast<int64_t>(ii) * w + jj] += gv;
                  }
                }
              }
            }
          }
        }
        return std::vector<Tensor>{gx};
      });
    }
  }
  return out;
}

// Spatial mean per channel: NCHW -> NC.
inline Tensor global_avg_pool(Tape* tape, const Tensor& x) {
  if (x.ndim() != 4) fail(ErrorCode::kShapeMismatch, "global_avg_pool expects NCHW");
  int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t plane = static_cast<int64_t>(h) * w;
  Tensor out = Tensor::zeros({n, c});
  float* o = out.mutable_data();
  const float* px = x.data();
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const float* p = px + (static_cast<int64_t>(ni) * c + ci) * plane;
      double acc = 0.0;
      for (int64_t i = 0; i < plane; ++i) acc += p[i];
      o[static_cast<int64_t>(ni) * c + ci] = static_cast<float>(acc / static_cast<double>(plane));
    }
  }
  check_finite("global_avg_pool", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&x}, ids)) {
    Shape xshape = x.shape();
    float inv = 1.0f / static_cast<float>(plane);
    out = out.with_requires_grad(true);
    tape->record("global_avg_pool", out, ids, [xshape, n, c, plane, inv](const Tensor& g) {
      Tensor gx = Tensor::zeros(xshape);
      float* q = gx.mutable_data();
      const float* pg = g.data();
      for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
          float gv = pg[static_cast<int64_t>(ni) * c + ci] * inv;
          float* p = q + (static_cast<int64_t>(ni) * c + ci) * plane;
          for (int64_t i = 0; i < plane; ++i) p[i] = gv;
        }
      return std::vector<Tensor>{gx};
    });
  }
  return out;
}

// Fully connected layer: y = x W + b with x: N x Cin, W: Cin x Cout.
inline Tensor dense(Tape* tape, const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.ndim() != 2 || w.ndim() != 2 || b.ndim() != 1 || x.dim(1) != w.dim(0) ||
      b.dim(0) != w.dim(1))
    fail(ErrorCode::kShapeMismatch,
         "dense: shapes " + shape_str(x.shape()) + ", " + shape_str(w.shape()) + ", " +
             shape_str(b.shape()) + " do not compose");
  int n = x.dim(0), cin = x.dim(1), cout = w.dim(1);
  Tensor out = Tensor::zeros({n, cout});
  detail::matmul_raw(x.data(), w.data(), out.mutable_data(), n, cin, cout);
  {
    float* o = out.mutable_data();
    const float* pb = b.data();
    for (int ni = 0; ni < n; ++ni)
      for (int j = 0; j < cout; ++j) o[static_cast<int64_t>(ni) * cout + j] += pb[j];
  }
  check_finite("dense", out);
  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&x, &w, &b}, ids)) {
    bool need_x = ids[0] >= 0, need_w = ids[1] >= 0, need_b = ids[2] >= 0;
    out = out.with_requires_grad(true);
    tape->record("dense", out, ids, [x, w, n, cin, cout, need_x, need_w, need_b](const Tensor& g) {
      std::vector<Tensor> grads(3);
      if (need_x) {
        Tensor gx = Tensor::zeros({n, cin});
        detail::matmul_a_bt(g.data(), w.data(), gx.mutable_data(), n, cout, cin);
        grads[0] = gx;
      }
      if (need_w) {
        Tensor gw = Tensor::zeros({cin, cout});
        detail::matmul_at_b(x.data(), g.data(), gw.mutable_data(), cin, n, cout);
        grads[1] = gw;
      }
      if (need_b) {
        Tensor gb = Tensor::zeros({cout});
        float* q = gb.mutable_data();
        const float* pg = g.data();
        for (int ni = 0; ni < n; ++ni)
          for (int j = 0; j < cout; ++j) q[j] += pg[static_cast<int64_t>(ni) * cout + j];
        grads[2] = gb;
      }
      return grads;
    });
  }
  return out;
}

struct DropoutSpec {
  float rate = 0.0f;
  Mode mode = Mode::kTrain;
};

// Inverted-dropout mask: each element is 0 with probability rate, otherwise
// 1/(1-rate). Multiplying by the mask is the whole train-mode op.
inline Tensor dropout_mask(const Shape& shape, float rate, RngStream& rng) {
  if (rate < 0.0f || rate >= 1.0f)
    fail(ErrorCode::kInvalidArgument, "dropout: rate must be in [0,1)");
  Tensor mask = Tensor::zeros(shape);
  float keep_scale = 1.0f / (1.0f - rate);
  float* m = mask.mutable_data();
  for (int64_t i = 0; i < mask.numel(); ++i)
    m[i] = rng.next_u01() < rate ? 0.0f : keep_scale;
  return mask;
}

inline Tensor dropout(Tape* tape, const Tensor& x, const DropoutSpec& spec, RngStream& rng) {
  if (spec.rate < 0.0f || spec.rate >= 1.0f)
    fail(ErrorCode::kInvalidArgument, "dropout: rate must be in [0,1)");
  if (spec.mode == Mode::kEval || spec.rate == 0.0f) return x;
  Tensor mask = dropout_mask(x.shape(), spec.rate, rng);
  return mul(tape, x, mask);
}

// Softmax probabilities per row, stabilized by max subtraction. Row math
// runs in double and is rounded once on output.
inline Tensor softmax(const Tensor& logits) {
  if (logits.ndim() != 2) fail(ErrorCode::kShapeMismatch, "softmax expects N x K");
  int n = logits.dim(0), k = logits.dim(1);
  Tensor out = Tensor::zeros({n, k});
  float* o = out.mutable_data();
  const float* p = logits.data();
  std::vector<double> e(static_cast<size_t>(k));
  for (int ni = 0; ni < n; ++ni) {
    const float* row = p + static_cast<int64_t>(ni) * k;
    float* orow = o + static_cast<int64_t>(ni) * k;
    float mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < k; ++j) {
      e[static_cast<size_t>(j)] = std::exp(static_cast<double>(row[j]) - static_cast<double>(mx));
      denom += e[static_cast<size_t>(j)];
    }
    for (int j = 0; j < k; ++j)
      orow[j] = static_cast<float>(e[static_cast<size_t>(j)] / denom);
  }
  check_finite("softmax", out);
  return out;
}

struct SoftmaxLossResult {
  Tensor loss;   // scalar, mean over rows of -log p[true]
  Tensor probs;  // N x K, not on the tape
};

// Fused softmax + cross entropy. Labels must be exactly one-hot per row.
inline SoftmaxLossResult softmax_cross_entropy(Tape* tape, const Tensor& logits,
                                               const Tensor& labels) {
  if (logits.ndim() != 2 || logits.dim(1) < 2)
    fail(ErrorCode::kShapeMismatch, "softmax_cross_entropy expects N x K logits with K >= 2");
  detail::check_same_shape("softmax_cross_entropy", logits, labels);
  int n = logits.dim(0), k = logits.dim(1);
  const float* pl = labels.data();
  for (int ni = 0; ni < n; ++ni) {
    int ones = 0;
    for (int j = 0; j < k; ++j) {
      float v = pl[static_cast<int64_t>(ni) * k + j];
      if (v == 1.0f)
        ++ones;
      else if (v != 0.0f)
        fail(ErrorCode::kInvalidArgument, "softmax_cross_entropy: labels must be one-hot");
    }
    if (ones != 1)
      fail(ErrorCode::kInvalidArgument, "softmax_cross_entropy: labels must be one-hot");
  }

  Tensor probs = softmax(logits);
  // Per-row loss in log space: -log p_true = log(sum_j exp(l_j - mx)) - (l_true - mx).
  double acc = 0.0;
  const float* pq = logits.data();
  for (int ni = 0; ni < n; ++ni) {
    const float* row = pq + static_cast<int64_t>(ni) * k;
    float mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    double shifted_true = 0.0;
    for (int j = 0; j < k; ++j) {
      double s = static_cast<double>(row[j]) - static_cast<double>(mx);
      denom += std::exp(s);
      if (pl[static_cast<int64_t>(ni) * k + j] == 1.0f) shifted_true = s;
    }
    acc += std::log(denom) - shifted_true;
  }
  double mean_loss = acc / static_cast<double>(n);
  Tensor loss = Tensor::scalar_of(static_cast<float>(mean_loss)).with_scalar_shadow(mean_loss);
  check_finite("softmax_cross_entropy", loss);

  std::vector<int> ids;
  if (detail::resolve_inputs(tape, {&logits}, ids)) {
    loss = loss.with_requires_grad(true);
    Tensor labels_c = labels, probs_c = probs;
    float inv_n = 1.0f / static_cast<float>(n);
    tape->record("softmax_cross_entropy", loss, ids, [probs_c, labels_c, inv_n](const Tensor& g) {
      float gs = g.scalar() * inv_n;
      Tensor gl = Tensor::zeros(probs_c.shape());
      float* q = gl.mutable_data();
      const float *pp = probs_c.data(), *pl = labels_c.data();
      for (int64_t i = 0; i < gl.numel(); ++i) q[i] = gs * (pp[i] - pl[i]);
      return std::vector<Tensor>{gl};
    });
  }
  return {loss, probs};
}

}  // namespace dgm
