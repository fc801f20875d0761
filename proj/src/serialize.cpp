#include "mrs/serialize.hpp"

#include <bit>
#include <cstring>

#include "mrs/errors.hpp"
#include "mrs/image.hpp"

namespace mrs {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "model files are little-endian");

namespace {

constexpr char kMagic[4] = {'M', 'R', 'S', 'M'};

json layer_to_json(const LayerKind& kind) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Conv2D>) return {{"type", "conv2d"}, {"out_channels", k.out_channels}};
        else if constexpr (std::is_same_v<K, MaxPool2D>) return {{"type", "maxpool2d"}};
        else if constexpr (std::is_same_v<K, BatchNorm2D>)
          return {{"type", "batchnorm2d"}, {"epsilon", k.epsilon}, {"momentum", k.momentum}};
        else if constexpr (std::is_same_v<K, Dropout>) return {{"type", "dropout"}, {"rate", k.rate}};
        else if constexpr (std::is_same_v<K, Dense>) return {{"type", "dense"}, {"out_features", k.out_features}};
        else if constexpr (std::is_same_v<K, ReLU>) return {{"type", "relu"}};
        else if constexpr (std::is_same_v<K, Softmax>) return {{"type", "softmax"}};
        else return {{"type", "flatten"}};
      },
      kind);
}

LayerKind layer_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "conv2d") return Conv2D{j.at("out_channels").get<Index>()};
  if (type == "maxpool2d") return MaxPool2D{};
  if (type == "batchnorm2d") return BatchNorm2D{j.at("epsilon").get<double>(), j.at("momentum").get<double>()};
  if (type == "dropout") return Dropout{j.at("rate").get<double>()};
  if (type == "dense") return Dense{j.at("out_features").get<Index>()};
  if (type == "relu") return ReLU{};
  if (type == "softmax") return Softmax{};
  if (type == "flatten") return Flatten{};
  throw FormatError("unknown layer type '" + type + "'");
}

}  // namespace

json spec_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& l : spec.layers) layers.push_back(layer_to_json(l));
  json head;
  if (const auto* c = std::get_if<ClassificationHead>(&spec.head)) {
    head = {{"type", "classification"}, {"n_classes", c->n_classes}};
  } else {
    head = {{"type", "regression"}, {"scale", std::get<RegressionHead>(spec.head).scale}};
  }
  return {{"name", spec.name},
          {"task", task_name(spec.task)},
          {"input_shape", spec.input_shape},
          {"layers", layers},
          {"head", head},
          {"loss", spec.loss == LossKind::CategoricalCrossEntropy ? "cce" : "mse"}};
}

ModelSpec spec_from_json(const json& j) {
  try {
    ModelSpec s;
    s.name = j.at("name").get<std::string>();
    s.task = parse_task(j.at("task").get<std::string>());
    s.input_shape = j.at("input_shape").get<Shape>();
    for (const auto& l : j.at("layers")) s.layers.push_back(layer_from_json(l));
    const json& head = j.at("head");
    const std::string head_type = head.at("type").get<std::string>();
    if (head_type == "classification") {
      s.head = ClassificationHead{head.at("n_classes").get<Index>()};
    } else if (head_type == "regression") {
      s.head = RegressionHead{head.at("scale").get<double>()};
    } else {
      throw FormatError("unknown head type '" + head_type + "'");
    }
    const std::string loss = j.at("loss").get<std::string>();
    if (loss == "cce") s.loss = LossKind::CategoricalCrossEntropy;
    else if (loss == "mse") s.loss = LossKind::MeanSquaredError;
    else throw FormatError("unknown loss '" + loss + "'");
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model spec: ") + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(std::string("model spec: ") + e.what());
  }
}

std::vector<std::uint8_t> serialize_model(const Model<float>& model) {
  json manifest = json::array();
  std::vector<const Tensorf*> tensors;
  for (std::size_t i = 0; i < model.layers().size(); ++i) {
    const auto& layer = model.layers()[i];
    const auto names = layer.tensor_names();
    std::size_t n = 0;
    for (const auto* group : {&layer.params(), &layer.buffers()}) {
      for (const auto& t : *group) {
        manifest.push_back({{"layer", i}, {"name", names.at(n++)}, {"shape", t.shape()}});
        tensors.push_back(&t);
      }
    }
  }
  const std::string meta = json{{"spec", spec_to_json(model.spec())}, {"tensors", manifest}}.dump();

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kModelFormatVersion);
  const auto len = static_cast<std::uint32_t>(meta.size());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(len >> (8 * b)));
  out.insert(out.end(), meta.begin(), meta.end());
  for (const Tensorf* t : tensors) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(t->data());
    out.insert(out.end(), p, p + t->size() * static_cast<Index>(sizeof(float)));
  }
  return out;
}

Model<float> deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 9 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a model file (bad magic)");
  if (bytes[4] != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(bytes[4]));
  }
  std::uint32_t len = 0;
  for (int b = 0; b < 4; ++b) len |= static_cast<std::uint32_t>(bytes[5 + static_cast<std::size_t>(b)]) << (8 * b);
  if (bytes.size() - 9 < len) throw TruncationError("model metadata block is truncated");

  json meta;
  try {
    meta = json::parse(bytes.begin() + 9, bytes.begin() + 9 + len);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model metadata is not valid JSON: ") + e.what());
  }
  if (!meta.contains("spec") || !meta.contains("tensors") || !meta["tensors"].is_array()) {
    throw FormatError("model metadata lacks 'spec' or 'tensors'");
  }
  const ModelSpec spec = spec_from_json(meta["spec"]);

  // Shapes the architecture demands, from a throwaway build.
  Model<float> reference = [&] {
    try {
      return build_model<float>(spec, 0);
    } catch (const ArchitectureError& e) {
      throw FormatError(std::string("model spec describes an illegal network: ") + e.what());
    }
  }();
  std::vector<Tensorf*> expected;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < reference.layers().size(); ++i) {
    auto& layer = reference.layers()[i];
    const auto names = layer.tensor_names();
    std::size_t n = 0;
    for (auto* group : {&layer.params(), &layer.buffers()}) {
      for (auto& t : *group) {
        expected.push_back(&t);
        labels.push_back("layer " + std::to_string(i) + " " + names.at(n++));
      }
    }
  }

  const json& manifest = meta["tensors"];
  if (manifest.size() != expected.size()) {
    throw ShapeMismatchError("manifest lists " + std::to_string(manifest.size()) + " tensors, the architecture has " +
                             std::to_string(expected.size()));
  }
  std::size_t pos = 9 + len;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    Shape shape;
    try {
      shape = manifest[k].at("shape").get<Shape>();
    } catch (const json::exception& e) {
      throw FormatError("tensor manifest entry " + std::to_string(k) + ": " + e.what());
    }
    if (shape != expected[k]->shape()) {
      throw ShapeMismatchError(labels[k] + ": file has " + to_string(shape) + ", architecture needs " +
                               to_string(expected[k]->shape()));
    }
    const std::size_t n = static_cast<std::size_t>(expected[k]->size()) * sizeof(float);
    if (bytes.size() - pos < n) {
      throw TruncationError("tensor data ends inside " + labels[k] + " (need " + std::to_string(n) + " bytes, have " +
                            std::to_string(bytes.size() - pos) + ")");
    }
    std::memcpy(expected[k]->data(), bytes.data() + pos, n);
    pos += n;
  }
  if (pos != bytes.size()) throw FormatError(std::to_string(bytes.size() - pos) + " unexpected bytes after tensor data");
  return reference;
}

void save_model(const Model<float>& model, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_model(model));
}

Model<float> load_model(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return deserialize_model(bytes);
  } catch (const TruncationError& e) {
    throw TruncationError(path.string() + ": " + e.what());
  } catch (const ShapeMismatchError& e) {
    throw ShapeMismatchError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace mrs
