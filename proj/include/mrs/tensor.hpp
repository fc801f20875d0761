#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mrs/errors.hpp"

namespace mrs {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index volume(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major n-dimensional array backed by an Eigen column array.
///
/// The last axis is contiguous. Four-dimensional tensors follow the
/// N,C,H,W convention used by every image layer.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(checked(std::move(shape))), data_(Array::Zero(volume(shape_))) {}

  Tensor(Shape shape, Array data) : shape_(checked(std::move(shape))), data_(std::move(data)) {
    if (data_.size() != volume(shape_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + to_string(shape_));
    }
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), Eigen::Map<const Array>(values.begin(), static_cast<Index>(values.size()))) {}

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }
  bool empty() const { return shape_.empty(); }

  Array& values() { return data_; }
  const Array& values() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& at(Index n, Index c, Index h, Index w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar at(Index n, Index c, Index h, Index w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  Scalar& at(Index r, Index c) { return data_[r * shape_[1] + c]; }
  Scalar at(Index r, Index c) const { return data_[r * shape_[1] + c]; }

  // Row-major view of a 2-D tensor.
  MatrixMap matrix() { return MatrixMap(data(), shape_.at(0), shape_.at(1)); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(data(), shape_.at(0), shape_.at(1)); }

  Tensor reshaped(Shape shape) const {
    if (volume(shape) != size()) {
      throw DimensionError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename To>
  Tensor<To> cast() const {
    return Tensor<To>(shape_, data_.template cast<To>());
  }

  bool all_finite() const { return data_.isFinite().all(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  static Shape checked(Shape shape) {
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
    }
    return shape;
  }

  Shape shape_;
  Array data_;
};

using Tensord = Tensor<double>;
using Tensorf = Tensor<float>;

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("shape " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  if (a.size() == 0) return Scalar(0);
  return (a.values() - b.values()).abs().maxCoeff();
}

}  // namespace mrs
