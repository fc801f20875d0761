#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mrs/layer.hpp"
#include "mrs/random.hpp"
#include "mrs/tensor.hpp"

namespace mrs {

// Which label a model predicts.
enum class Task { Emotion, Age, Ethnicity };

struct ClassificationHead {
  Index n_classes = 2;
};

// The final Dense(1) output is multiplied by `scale`, so the network learns a
// unit-range target while predictions stay in label units (years).
struct RegressionHead {
  double scale = 116.0;
};

using Head = std::variant<ClassificationHead, RegressionHead>;

enum class LossKind { CategoricalCrossEntropy, MeanSquaredError };

struct ModelSpec {
  std::string name;
  Task task = Task::Emotion;
  std::vector<LayerKind> layers;
  Head head = ClassificationHead{};
  LossKind loss = LossKind::CategoricalCrossEntropy;
  Shape input_shape{1, 48, 48};
};

std::string task_name(Task task);                // "emotion" | "age" | "ethnicity"
Task parse_task(const std::string& name);        // throws ParameterError

// Block-structured spec: n_conv convolutions spread over n_pool
// Conv/ReLU.../MaxPool/BatchNorm/Dropout(0.25) blocks, filters doubling
// every cascaded pair from 32, then the task's head.
ModelSpec make_spec(Task task, int n_conv, int n_pool);

ModelSpec emotion_spec();    // 6 conv, 3 pool, 4-way softmax, cross-entropy
ModelSpec age_spec();        // 6 conv, 4 pool, scalar regression, MSE
ModelSpec ethnicity_spec();  // 3 conv, 3 pool, 5-way softmax, cross-entropy
ModelSpec default_spec(Task task);

// (number of Conv2D, number of MaxPool2D) in a spec.
std::pair<int, int> count_conv_pool(const ModelSpec& spec);

// Per-sample shapes entering each layer, plus the final output shape.
// Throws ArchitectureError for illegal sequences or a head mismatch.
std::vector<Shape> infer_shapes(const ModelSpec& spec);

template <typename Scalar>
class Model {
 public:
  Model(ModelSpec spec, std::vector<Layer<Scalar>> layers) : spec_(std::move(spec)), layers_(std::move(layers)) {}

  const ModelSpec& spec() const { return spec_; }
  std::vector<Layer<Scalar>>& layers() { return layers_; }
  const std::vector<Layer<Scalar>>& layers() const { return layers_; }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, ops::Mode mode, std::uint64_t seed) {
    Tensor<Scalar> y = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) y = layers_[i].forward(y, mode, mix_seed(seed, i));
    if (const auto* r = std::get_if<RegressionHead>(&spec_.head)) y.values() *= static_cast<Scalar>(r->scale);
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& upstream) {
    Tensor<Scalar> g = upstream;
    if (const auto* r = std::get_if<RegressionHead>(&spec_.head)) g.values() *= static_cast<Scalar>(r->scale);
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->backward(g);
    return g;
  }

  // Inference mode (dropout off, running batch-norm statistics); const and
  // safe for concurrent callers.
  Tensor<Scalar> infer(const Tensor<Scalar>& x) const {
    Tensor<Scalar> y = x;
    for (const auto& layer : layers_) y = layer.infer(y);
    if (const auto* r = std::get_if<RegressionHead>(&spec_.head)) y.values() *= static_cast<Scalar>(r->scale);
    return y;
  }

  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> out;
    for (auto& layer : layers_) {
      for (auto* p : layer.parameters()) out.push_back(p);
    }
    return out;
  }

  std::vector<const Tensor<Scalar>*> gradients() const {
    std::vector<const Tensor<Scalar>*> out;
    for (const auto& layer : layers_) {
      for (const auto* g : layer.gradients()) out.push_back(g);
    }
    return out;
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& layer : layers_) {
      for (const auto& p : layer.params()) n += p.size();
    }
    return n;
  }

  template <typename To>
  Model<To> cast() const {
    std::vector<Layer<To>> layers;
    for (const auto& layer : layers_) layers.push_back(layer.template cast<To>());
    return Model<To>(spec_, std::move(layers));
  }

 private:
  ModelSpec spec_;
  std::vector<Layer<Scalar>> layers_;
};

// Deterministic He-normal initialization from `seed`.
template <typename Scalar>
Model<Scalar> build_model(const ModelSpec& spec, std::uint64_t seed) {
  const std::vector<Shape> shapes = infer_shapes(spec);
  Rng rng(seed);
  std::vector<Layer<Scalar>> layers;
  layers.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) layers.emplace_back(spec.layers[i], shapes[i], rng);
  return Model<Scalar>(spec, std::move(layers));
}

extern template class Model<float>;
extern template class Model<double>;

}  // namespace mrs
