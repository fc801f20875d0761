#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "mrs/errors.hpp"
#include "mrs/tensor.hpp"

namespace mrs::losses {

inline constexpr double kProbabilityFloor = 1e-12;

namespace detail {

template <typename Scalar>
void check_same_shape(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": prediction " + to_string(a.shape()) + " vs target " +
                         to_string(b.shape()));
  }
}

template <typename Scalar>
void check_classification(const Tensor<Scalar>& probs, const Tensor<Scalar>& one_hot) {
  check_same_shape("categorical_cross_entropy", probs, one_hot);
  if (probs.rank() != 2) throw DimensionError("categorical_cross_entropy: expected [N, classes] tensors");
  const Index n = probs.dim(0), k = probs.dim(1);
  for (Index r = 0; r < n; ++r) {
    const auto p = probs.values().segment(r * k, k);
    if (std::abs(static_cast<double>(p.sum()) - 1.0) > 1e-6) {
      throw LabelError("categorical_cross_entropy: probability row " + std::to_string(r) + " does not sum to 1");
    }
    const auto t = one_hot.values().segment(r * k, k);
    const Index ones = (t == Scalar(1)).count();
    const Index zeros = (t == Scalar(0)).count();
    if (ones != 1 || zeros != k - 1) {
      throw LabelError("categorical_cross_entropy: target row " + std::to_string(r) + " is not one-hot");
    }
  }
}

}  // namespace detail

// Batch-mean categorical cross-entropy; probabilities are clamped to [1e-12, 1].
template <typename Scalar>
Scalar categorical_cross_entropy(const Tensor<Scalar>& probs, const Tensor<Scalar>& one_hot) {
  detail::check_classification(probs, one_hot);
  const auto clamped = probs.values().max(Scalar(kProbabilityFloor)).min(Scalar(1));
  return -(one_hot.values() * clamped.log()).sum() / static_cast<Scalar>(probs.dim(0));
}

template <typename Scalar>
Tensor<Scalar> categorical_cross_entropy_backward(const Tensor<Scalar>& probs, const Tensor<Scalar>& one_hot) {
  detail::check_classification(probs, one_hot);
  const auto n = static_cast<Scalar>(probs.dim(0));
  const auto clamped = probs.values().max(Scalar(kProbabilityFloor)).min(Scalar(1));
  return Tensor<Scalar>(probs.shape(), -one_hot.values() / clamped / n);
}

template <typename Scalar>
Scalar mse(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::check_same_shape("mse", pred, target);
  return (pred.values() - target.values()).square().mean();
}

template <typename Scalar>
Tensor<Scalar> mse_backward(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::check_same_shape("mse_backward", pred, target);
  const auto n = static_cast<Scalar>(pred.size());
  return Tensor<Scalar>(pred.shape(), Scalar(2) * (pred.values() - target.values()) / n);
}

template <typename Scalar>
Scalar mae(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::check_same_shape("mae", pred, target);
  return (pred.values() - target.values()).abs().mean();
}

// Subgradient 0 at exact ties.
template <typename Scalar>
Tensor<Scalar> mae_backward(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::check_same_shape("mae_backward", pred, target);
  const auto n = static_cast<Scalar>(pred.size());
  return Tensor<Scalar>(pred.shape(), (pred.values() - target.values()).sign() / n);
}

}  // namespace mrs::losses
