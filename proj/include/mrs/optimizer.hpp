#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mrs/errors.hpp"
#include "mrs/tensor.hpp"

namespace mrs {

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct OptimizerState {
  long step = 0;
  std::vector<Tensor<Scalar>> first_moment;
  std::vector<Tensor<Scalar>> second_moment;
};

// Applies one update in place. Adam moments are created lazily on the first
// step and must keep the same parameter ordering afterwards.
template <typename Scalar>
void optimizer_step(std::span<Tensor<Scalar>* const> params, std::span<const Tensor<Scalar>* const> grads,
                    OptimizerState<Scalar>& state, const OptimizerConfig& config) {
  if (params.size() != grads.size()) {
    throw DimensionError("optimizer_step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape()) {
      throw DimensionError("optimizer_step: parameter " + std::to_string(i) + " shape " +
                           to_string(params[i]->shape()) + " vs gradient " + to_string(grads[i]->shape()));
    }
  }
  ++state.step;
  const auto lr = static_cast<Scalar>(config.learning_rate);
  if (config.kind == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->values() -= lr * grads[i]->values();
    return;
  }

  if (state.first_moment.empty()) {
    for (const Tensor<Scalar>* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  } else if (state.first_moment.size() != params.size()) {
    throw DimensionError("optimizer_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  const auto b1 = static_cast<Scalar>(config.beta1);
  const auto b2 = static_cast<Scalar>(config.beta2);
  const auto eps = static_cast<Scalar>(config.epsilon);
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(config.beta1, static_cast<double>(state.step)));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(config.beta2, static_cast<double>(state.step)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i].values();
    auto& v = state.second_moment[i].values();
    const auto& g = grads[i]->values();
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.square();
    params[i]->values() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

}  // namespace mrs
