#include "mrs/model.hpp"

#include <algorithm>

#include "mrs/errors.hpp"

namespace mrs {

template class Model<float>;
template class Model<double>;

std::string task_name(Task task) {
  switch (task) {
    case Task::Emotion: return "emotion";
    case Task::Age: return "age";
    case Task::Ethnicity: return "ethnicity";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "emotion") return Task::Emotion;
  if (name == "age") return Task::Age;
  if (name == "ethnicity") return Task::Ethnicity;
  throw ParameterError("unknown model '" + name + "' (expected emotion|age|ethnicity)");
}

ModelSpec make_spec(Task task, int n_conv, int n_pool) {
  if (n_conv < 1) throw ArchitectureError("need at least one Conv2D layer, got " + std::to_string(n_conv));
  if (n_pool < 0) throw ArchitectureError("pool count must be non-negative, got " + std::to_string(n_pool));

  ModelSpec spec;
  spec.task = task;
  const int blocks = std::max(n_pool, 1);
  int conv_index = 0;
  for (int b = 0; b < blocks; ++b) {
    const int convs = n_conv / blocks + (b < n_conv % blocks ? 1 : 0);
    for (int i = 0; i < convs; ++i, ++conv_index) {
      spec.layers.emplace_back(Conv2D{Index{32} << (conv_index / 2)});
      spec.layers.emplace_back(ReLU{});
    }
    if (b < n_pool) spec.layers.emplace_back(MaxPool2D{});
    if (convs > 0 || b < n_pool) {
      spec.layers.emplace_back(BatchNorm2D{});
      spec.layers.emplace_back(Dropout{0.25});
    }
  }
  spec.layers.emplace_back(Flatten{});
  spec.layers.emplace_back(Dense{256});
  spec.layers.emplace_back(ReLU{});
  spec.layers.emplace_back(Dropout{0.5});

  switch (task) {
    case Task::Emotion:
      spec.name = "CNN-Emotion";
      spec.layers.emplace_back(Dense{4});
      spec.layers.emplace_back(Softmax{});
      spec.head = ClassificationHead{4};
      spec.loss = LossKind::CategoricalCrossEntropy;
      break;
    case Task::Ethnicity:
      spec.name = "CNN-Ethnicity";
      spec.layers.emplace_back(Dense{5});
      spec.layers.emplace_back(Softmax{});
      spec.head = ClassificationHead{5};
      spec.loss = LossKind::CategoricalCrossEntropy;
      break;
    case Task::Age:
      spec.name = "CNN-Age";
      spec.layers.emplace_back(Dense{1});
      spec.head = RegressionHead{116.0};
      spec.loss = LossKind::MeanSquaredError;
      break;
  }
  return spec;
}

ModelSpec emotion_spec() { return make_spec(Task::Emotion, 6, 3); }
ModelSpec age_spec() { return make_spec(Task::Age, 6, 4); }
ModelSpec ethnicity_spec() { return make_spec(Task::Ethnicity, 3, 3); }

ModelSpec default_spec(Task task) {
  switch (task) {
    case Task::Emotion: return emotion_spec();
    case Task::Age: return age_spec();
    case Task::Ethnicity: return ethnicity_spec();
  }
  throw ParameterError("unknown task");
}

std::pair<int, int> count_conv_pool(const ModelSpec& spec) {
  int conv = 0, pool = 0;
  for (const auto& k : spec.layers) {
    conv += std::holds_alternative<Conv2D>(k);
    pool += std::holds_alternative<MaxPool2D>(k);
  }
  return {conv, pool};
}

std::vector<Shape> infer_shapes(const ModelSpec& spec) {
  std::vector<Shape> shapes{spec.input_shape};
  for (const auto& k : spec.layers) shapes.push_back(layer_output_shape(k, shapes.back()));

  const Shape& out = shapes.back();
  if (const auto* c = std::get_if<ClassificationHead>(&spec.head)) {
    if (out != Shape{c->n_classes}) {
      throw ArchitectureError(spec.name + ": classification head expects output " + to_string(Shape{c->n_classes}) +
                              ", layers produce " + to_string(out));
    }
    if (spec.layers.empty() || !std::holds_alternative<Softmax>(spec.layers.back())) {
      throw ArchitectureError(spec.name + ": classification head must end in Softmax");
    }
    if (spec.loss != LossKind::CategoricalCrossEntropy) {
      throw ArchitectureError(spec.name + ": classification head needs cross-entropy loss");
    }
  } else {
    if (out != Shape{1}) {
      throw ArchitectureError(spec.name + ": regression head expects output [1], layers produce " + to_string(out));
    }
    if (spec.loss != LossKind::MeanSquaredError) {
      throw ArchitectureError(spec.name + ": regression head needs MSE loss");
    }
  }
  return shapes;
}

}  // namespace mrs
