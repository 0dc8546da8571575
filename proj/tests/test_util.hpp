#pragma once

#include <vector>

#include "dgm/rng.hpp"
#include "dgm/tensor.hpp"

namespace dgm::testing {

// Uniform values in (lo, hi).
inline Tensor random_tensor(const Shape& shape, RngStream& rng, float lo = -2.0f,
                            float hi = 2.0f) {
  Tensor t = Tensor::zeros(shape);
  float* p = t.mutable_data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = rng.next_uniform(lo, hi);
  return t;
}

// Values from a shuffled evenly spaced grid over [lo, hi] with spacing well
// above the finite-difference step, so pooling argmaxes and ReLU masks stay
// stable under +/- eps probes. Values within `avoid` of zero are nudged away.
inline Tensor separated_tensor(const Shape& shape, RngStream& rng, float lo = -2.0f,
                               float hi = 2.0f, float avoid = 0.05f) {
  int64_t n = shape_numel(shape);
  std::vector<float> grid(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    float v = lo + (hi - lo) * (static_cast<float>(i) + 0.5f) / static_cast<float>(n);
    if (v > -avoid && v < avoid) v = v < 0.0f ? -avoid : avoid;
    grid[static_cast<size_t>(i)] = v;
  }
  rng.shuffle(grid);
  return Tensor(shape, std::move(grid));
}

// Loss-projection weights 1 +/- 0.75 with random signs: far from zero and
// from each other, so no per-coordinate gradient cancels to the noise floor.
inline Tensor projection_weights(const Shape& shape, RngStream& rng) {
  Tensor t = Tensor::zeros(shape);
  float* p = t.mutable_data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = rng.next_u01() < 0.5f ? 0.25f : 1.75f;
  return t;
}

inline Tensor one_hot_batch(const std::vector<int>& labels, int k) {
  Tensor t = Tensor::zeros({static_cast<int>(labels.size()), k});
  for (size_t i = 0; i < labels.size(); ++i)
    t.mutable_data()[i * static_cast<size_t>(k) + static_cast<size_t>(labels[i])] = 1.0f;
  return t;
}

}  // namespace dgm::testing
