#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dgm/common.hpp"

namespace dgm {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) {
    if (d <= 0) fail(ErrorCode::kInvalidArgument, "non-positive extent in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

// Dense row-major float32 tensor. Copies share storage; by convention the
// data is never written after the tensor leaves the function that built it.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<float> data, bool requires_grad = false)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<float>>(std::move(data))),
        requires_grad_(requires_grad) {
    if (shape_numel(shape_) != static_cast<int64_t>(data_->size()))
      fail(ErrorCode::kShapeMismatch,
           "shape " + shape_str(shape_) + " does not match " + std::to_string(data_->size()) + " values");
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 0.0f, requires_grad);
  }

  static Tensor full(Shape shape, float value, bool requires_grad = false) {
    int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<float>(static_cast<size_t>(n), value), requires_grad);
  }

  static Tensor scalar_of(float value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<float>{value}, requires_grad);
  }

  static Tensor zeros_like(const Tensor& t) { return zeros(t.shape()); }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }
  bool requires_grad() const { return requires_grad_; }

  const float* data() const { return data_->data(); }
  float* mutable_data() { return data_->data(); }
  const std::vector<float>& values() const { return *data_; }

  // Identity of the underlying storage; used by the tape to recognize reuse
  // of the same tensor within one forward pass.
  const void* storage_id() const { return data_.get(); }

  float scalar() const {
    if (numel() != 1) fail(ErrorCode::kShapeMismatch, "scalar() on tensor of shape " + shape_str(shape_));
    return (*data_)[0];
  }

  // Scalar reductions accumulate in double; they stash the unrounded value
  // here so the finite-difference checker is not limited by float32
  // quantization of the loss. Storage and all consuming ops stay float32.
  double scalar_f64() const {
    if (has_f64_shadow_) return f64_shadow_;
    return static_cast<double>(scalar());
  }

  Tensor with_scalar_shadow(double v) const {
    Tensor t = *this;
    t.has_f64_shadow_ = true;
    t.f64_shadow_ = v;
    return t;
  }

  Tensor with_requires_grad(bool rg) const {
    Tensor t = *this;
    t.requires_grad_ = rg;
    return t;
  }

  // Deep copy (fresh storage).
  Tensor clone() const {
    return Tensor(shape_, *data_, requires_grad_);
  }

  Tensor reshaped_view(Shape new_shape) const {
    if (shape_numel(new_shape) != numel())
      fail(ErrorCode::kShapeMismatch,
           "reshape " + shape_str(shape_) + " -> " + shape_str(new_shape) + " changes element count");
    Tensor t = *this;
    t.shape_ = std::move(new_shape);
    return t;
  }

  bool all_finite() const {
    for (float v : *data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool bitwise_equal(const Tensor& o) const {
    if (shape_ != o.shape_) return false;
    return std::memcmp(data(), o.data(), sizeof(float) * static_cast<size_t>(numel())) == 0;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<float>> data_;
  bool requires_grad_ = false;
  bool has_f64_shadow_ = false;
  double f64_shadow_ = 0.0;
};

inline void check_finite(const char* op, const Tensor& t) {
  if (!t.all_finite())
    fail(ErrorCode::kNonFinite, std::string(op) + " produced a non-finite value");
}

}  // namespace dgm
