#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dgm/tape.hpp"
#include "dgm/tensor.hpp"

namespace dgm {

// Scalar-valued function of one tensor. Called with a tape for the analytic
// pass and with nullptr for the finite-difference probes, so it must be pure
// in its tensor argument.
using ScalarFn = std::function<Tensor(Tape*, const Tensor&)>;

// Central-difference gradient check. Returns the max over coordinates of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
// Coordinates flagged in `skip` (e.g. near a ReLU kink) are excluded.
inline float grad_check(const ScalarFn& f, const Tensor& x, float eps,
                        const std::vector<bool>* skip = nullptr) {
  Tensor x_rg = x.clone().with_requires_grad(true);
  Tape tape;
  tape.leaf(x_rg);
  Tensor fx = f(&tape, x_rg);
  if (fx.numel() != 1)
    fail(ErrorCode::kInvalidArgument, "grad_check: function must be scalar-valued");
  if (!fx.all_finite())
    fail(ErrorCode::kNonFinite, "grad_check: non-finite value at the base point");
  Tensor analytic = tape.backward(fx).grad_for(x_rg);

  float max_rel = 0.0f;
  for (int64_t i = 0; i < x.numel(); ++i) {
    if (skip && (*skip)[static_cast<size_t>(i)]) continue;
    Tensor xp = x.clone();
    Tensor xm = x.clone();
    xp.mutable_data()[i] += eps;
    xm.mutable_data()[i] -= eps;
    // x +/- eps rounds to float32; divide by the step actually applied.
    double step = static_cast<double>(xp.data()[i]) - static_cast<double>(xm.data()[i]);
    Tensor fp = f(nullptr, xp);
    Tensor fm = f(nullptr, xm);
    if (!fp.all_finite() || !fm.all_finite())
      fail(ErrorCode::kNonFinite, "grad_check: non-finite value in the probe region");
    double numeric = (fp.scalar_f64() - fm.scalar_f64()) / step;
    double a = analytic.data()[i];
    double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
    float rel = static_cast<float>(std::fabs(a - numeric) / denom);
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

inline bool grad_check_ok(const ScalarFn& f, const Tensor& x, float eps, float tol,
                          const std::vector<bool>* skip = nullptr) {
  return grad_check(f, x, eps, skip) < tol;
}

}  // namespace dgm
