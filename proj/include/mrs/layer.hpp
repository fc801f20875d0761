#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "mrs/errors.hpp"
#include "mrs/ops.hpp"
#include "mrs/random.hpp"
#include "mrs/tensor.hpp"

namespace mrs {

// The layer vocabulary. Convolutions are fixed at 3x3, stride 1, zero
// same-padding; pooling is fixed at 2x2, stride 2.
struct Conv2D {
  Index out_channels = 32;
};
struct MaxPool2D {};
struct BatchNorm2D {
  double epsilon = 1e-5;
  double momentum = 0.9;
};
struct Dropout {
  double rate = 0.25;
};
struct Dense {
  Index out_features = 1;
};
struct ReLU {};
struct Softmax {};
struct Flatten {};

using LayerKind = std::variant<Conv2D, MaxPool2D, BatchNorm2D, Dropout, Dense, ReLU, Softmax, Flatten>;

std::string layer_name(const LayerKind& kind);

// Per-sample output shape (no batch axis) of `kind` applied to `input`.
// Throws ArchitectureError when the layer cannot accept that shape.
Shape layer_output_shape(const LayerKind& kind, const Shape& input);

template <typename Scalar>
class Layer {
 public:
  // Fresh layer with He-normal weights drawn from `rng`.
  Layer(LayerKind kind, Shape input_shape, Rng& rng)
      : kind_(std::move(kind)), input_shape_(std::move(input_shape)),
        output_shape_(layer_output_shape(kind_, input_shape_)) {
    std::visit([&](const auto& k) { init(k, rng); }, kind_);
    for (const auto& p : params_) grads_.emplace_back(p.shape());
  }

  // Layer with given parameters and buffers (used by deserialization).
  Layer(LayerKind kind, Shape input_shape, std::vector<Tensor<Scalar>> params, std::vector<Tensor<Scalar>> buffers)
      : kind_(std::move(kind)), input_shape_(std::move(input_shape)),
        output_shape_(layer_output_shape(kind_, input_shape_)), params_(std::move(params)),
        buffers_(std::move(buffers)) {
    for (const auto& p : params_) grads_.emplace_back(p.shape());
  }

  const LayerKind& kind() const { return kind_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }

  std::vector<Tensor<Scalar>>& params() { return params_; }
  const std::vector<Tensor<Scalar>>& params() const { return params_; }
  const std::vector<Tensor<Scalar>>& grads() const { return grads_; }
  std::vector<Tensor<Scalar>>& buffers() { return buffers_; }
  const std::vector<Tensor<Scalar>>& buffers() const { return buffers_; }

  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<const Tensor<Scalar>*> gradients() const {
    std::vector<const Tensor<Scalar>*> out;
    for (const auto& g : grads_) out.push_back(&g);
    return out;
  }

  // Names of params followed by buffers, in storage order.
  std::vector<std::string> tensor_names() const;

  // Forward pass that caches what backward needs. Train mode updates
  // batch-norm running statistics and samples a dropout mask from `seed`.
  Tensor<Scalar> forward(const Tensor<Scalar>& x, ops::Mode mode, std::uint64_t seed) {
    check_input(x);
    mode_ = mode;
    Tensor<Scalar> y = std::visit(
        [&](const auto& k) -> Tensor<Scalar> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Conv2D>) {
            input_ = x;
            return ops::conv2d(x, params_[0], params_[1]);
          } else if constexpr (std::is_same_v<K, MaxPool2D>) {
            auto r = ops::maxpool2d(x);
            input_shape_cache_ = x.shape();
            argmax_ = std::move(r.argmax);
            return std::move(r.output);
          } else if constexpr (std::is_same_v<K, BatchNorm2D>) {
            ops::BatchNormStats<Scalar> stats{buffers_[0], buffers_[1]};
            bn_ = ops::batchnorm2d(x, params_[0], params_[1], mode, stats, k.epsilon, k.momentum);
            buffers_[0] = std::move(stats.running_mean);
            buffers_[1] = std::move(stats.running_var);
            return bn_.output;
          } else if constexpr (std::is_same_v<K, Dropout>) {
            auto r = ops::dropout(x, k.rate, mode, seed);
            mask_ = std::move(r.mask);
            return std::move(r.output);
          } else if constexpr (std::is_same_v<K, Dense>) {
            input_ = x;
            return ops::dense(x, params_[0], params_[1]);
          } else if constexpr (std::is_same_v<K, ReLU>) {
            input_ = x;
            return ops::relu(x);
          } else if constexpr (std::is_same_v<K, Softmax>) {
            output_ = ops::softmax(x);
            return output_;
          } else {
            input_shape_cache_ = x.shape();
            return x.reshaped({x.dim(0), volume(output_shape_)});
          }
        },
        kind_);
    return y;
  }

  // Returns d_input and overwrites grads() for the most recent forward.
  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) {
    return std::visit(
        [&](const auto& k) -> Tensor<Scalar> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Conv2D>) {
            auto g = ops::conv2d_backward(input_, params_[0], upstream);
            grads_[0] = std::move(g.kernels);
            grads_[1] = std::move(g.bias);
            return std::move(g.input);
          } else if constexpr (std::is_same_v<K, MaxPool2D>) {
            return ops::maxpool2d_backward(input_shape_cache_, argmax_, upstream);
          } else if constexpr (std::is_same_v<K, BatchNorm2D>) {
            auto g = ops::batchnorm2d_backward(bn_, params_[0], upstream, mode_);
            grads_[0] = std::move(g.gamma);
            grads_[1] = std::move(g.beta);
            return std::move(g.input);
          } else if constexpr (std::is_same_v<K, Dropout>) {
            return ops::dropout_backward(mask_, upstream);
          } else if constexpr (std::is_same_v<K, Dense>) {
            auto g = ops::dense_backward(input_, params_[0], upstream);
            grads_[0] = std::move(g.weights);
            grads_[1] = std::move(g.bias);
            return std::move(g.input);
          } else if constexpr (std::is_same_v<K, ReLU>) {
            return ops::relu_backward(input_, upstream);
          } else if constexpr (std::is_same_v<K, Softmax>) {
            return ops::softmax_backward(output_, upstream);
          } else {
            return upstream.reshaped(input_shape_cache_);
          }
        },
        kind_);
  }

  // Inference-mode forward without caching; safe for concurrent callers.
  Tensor<Scalar> infer(const Tensor<Scalar>& x) const {
    check_input(x);
    return std::visit(
        [&](const auto& k) -> Tensor<Scalar> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Conv2D>) {
            return ops::conv2d(x, params_[0], params_[1]);
          } else if constexpr (std::is_same_v<K, MaxPool2D>) {
            return ops::maxpool2d(x).output;
          } else if constexpr (std::is_same_v<K, BatchNorm2D>) {
            ops::BatchNormStats<Scalar> stats{buffers_[0], buffers_[1]};
            return ops::batchnorm2d(x, params_[0], params_[1], ops::Mode::Infer, stats, k.epsilon, k.momentum).output;
          } else if constexpr (std::is_same_v<K, Dropout>) {
            return x;
          } else if constexpr (std::is_same_v<K, Dense>) {
            return ops::dense(x, params_[0], params_[1]);
          } else if constexpr (std::is_same_v<K, ReLU>) {
            return ops::relu(x);
          } else if constexpr (std::is_same_v<K, Softmax>) {
            return ops::softmax(x);
          } else {
            return x.reshaped({x.dim(0), volume(output_shape_)});
          }
        },
        kind_);
  }

  template <typename To>
  Layer<To> cast() const {
    std::vector<Tensor<To>> p, b;
    for (const auto& t : params_) p.push_back(t.template cast<To>());
    for (const auto& t : buffers_) b.push_back(t.template cast<To>());
    return Layer<To>(kind_, input_shape_, std::move(p), std::move(b));
  }

 private:
  void check_input(const Tensor<Scalar>& x) const {
    if (x.rank() != static_cast<Index>(input_shape_.size()) + 1 ||
        !std::equal(input_shape_.begin(), input_shape_.end(), x.shape().begin() + 1)) {
      throw DimensionError(layer_name(kind_) + ": expected per-sample shape " + to_string(input_shape_) +
                           ", got batch " + to_string(x.shape()));
    }
  }

  static Tensor<Scalar> he_normal(Shape shape, Index fan_in, Rng& rng) {
    Tensor<Scalar> t(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.normal(0.0, stddev));
    return t;
  }

  void init(const Conv2D& k, Rng& rng) {
    const Index c = input_shape_[0];
    params_.push_back(he_normal({k.out_channels, c, 3, 3}, c * 9, rng));
    params_.emplace_back(Shape{k.out_channels});
  }
  void init(const BatchNorm2D&, Rng&) {
    const Index c = input_shape_[0];
    params_.push_back(Tensor<Scalar>::constant({c}, Scalar(1)));
    params_.emplace_back(Shape{c});
    buffers_.emplace_back(Shape{c});
    buffers_.push_back(Tensor<Scalar>::constant({c}, Scalar(1)));
  }
  void init(const Dense& k, Rng& rng) {
    const Index f = input_shape_[0];
    params_.push_back(he_normal({f, k.out_features}, f, rng));
    params_.emplace_back(Shape{k.out_features});
  }
  template <typename K>
  void init(const K&, Rng&) {}

  LayerKind kind_;
  Shape input_shape_;
  Shape output_shape_;
  std::vector<Tensor<Scalar>> params_;
  std::vector<Tensor<Scalar>> grads_;
  std::vector<Tensor<Scalar>> buffers_;

  // Forward cache.
  ops::Mode mode_ = ops::Mode::Infer;
  Tensor<Scalar> input_;
  Tensor<Scalar> output_;
  Shape input_shape_cache_;
  std::vector<Index> argmax_;
  ops::BatchNormResult<Scalar> bn_;
  Tensor<Scalar> mask_;
};

template <typename Scalar>
std::vector<std::string> Layer<Scalar>::tensor_names() const {
  return std::visit(
      [](const auto& k) -> std::vector<std::string> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Conv2D>) return {"kernels", "bias"};
        else if constexpr (std::is_same_v<K, Dense>) return {"weights", "bias"};
        else if constexpr (std::is_same_v<K, BatchNorm2D>) return {"gamma", "beta", "running_mean", "running_var"};
        else return {};
      },
      kind_);
}

}  // namespace mrs
