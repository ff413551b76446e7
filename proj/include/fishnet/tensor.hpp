#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fish {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

using Shape = std::vector<int64_t>;

inline int64_t numel_of(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// Dense N-d array in row-major layout (NCHW for feature maps) with an
// optional gradient buffer of identical shape.
template <typename Scalar>
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    for (int64_t d : shape_) {
      if (d < 1)
        throw std::invalid_argument("Tensor: dims must all be >= 1, got " +
                                    shape_str(shape_));
    }
    values_ = ArrayX<Scalar>::Zero(numel_of(shape_));
    if (requires_grad_) grad_ = ArrayX<Scalar>::Zero(values_.size());
  }

  static Tensor full(Shape shape, Scalar v) {
    Tensor t(std::move(shape));
    t.values_.setConstant(v);
    return t;
  }

  static Tensor from(Shape shape, std::vector<Scalar> data) {
    Tensor t(std::move(shape));
    if (static_cast<int64_t>(data.size()) != t.numel())
      throw std::invalid_argument("Tensor::from: data length does not match shape");
    for (int64_t i = 0; i < t.numel(); ++i) t.values_[i] = data[static_cast<size_t>(i)];
    return t;
  }

  const Shape& shape() const { return shape_; }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return values_.size(); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool rg) {
    requires_grad_ = rg;
    if (rg) ensure_grad();
  }

  ArrayX<Scalar>& values() { return values_; }
  const ArrayX<Scalar>& values() const { return values_; }

  bool has_grad() const { return grad_.size() == values_.size() && values_.size() > 0; }
  ArrayX<Scalar>& grad() {
    ensure_grad();
    return grad_;
  }
  const ArrayX<Scalar>& grad() const {
    if (!has_grad()) throw std::logic_error("Tensor: grad not materialized");
    return grad_;
  }

  void ensure_grad() {
    if (grad_.size() != values_.size()) grad_ = ArrayX<Scalar>::Zero(values_.size());
  }
  void zero_grad() {
    if (grad_.size() == values_.size()) grad_.setZero();
  }

  // NCHW accessors; valid only for 4-d tensors.
  int64_t offset(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return ((n * dim(1) + c) * dim(2) + h) * dim(3) + w;
  }
  Scalar& at(int64_t n, int64_t c, int64_t h, int64_t w) {
    return values_[offset(n, c, h, w)];
  }
  Scalar at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    return values_[offset(n, c, h, w)];
  }

private:
  Shape shape_;
  ArrayX<Scalar> values_;
  ArrayX<Scalar> grad_;
  bool requires_grad_ = false;
};

}  // namespace fish
