#include "mrs/layer.hpp"

namespace mrs {

std::string layer_name(const LayerKind& kind) {
  return std::visit(
      [](const auto& k) -> std::string {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Conv2D>) return "Conv2D";
        else if constexpr (std::is_same_v<K, MaxPool2D>) return "MaxPool2D";
        else if constexpr (std::is_same_v<K, BatchNorm2D>) return "BatchNorm2D";
        else if constexpr (std::is_same_v<K, Dropout>) return "Dropout";
        else if constexpr (std::is_same_v<K, Dense>) return "Dense";
        else if constexpr (std::is_same_v<K, ReLU>) return "ReLU";
        else if constexpr (std::is_same_v<K, Softmax>) return "Softmax";
        else return "Flatten";
      },
      kind);
}

Shape layer_output_shape(const LayerKind& kind, const Shape& in) {
  auto need_image = [&](const std::string& name) {
    if (in.size() != 3) {
      throw ArchitectureError(name + " needs a C,H,W input, got " + to_string(in));
    }
  };
  return std::visit(
      [&](const auto& k) -> Shape {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Conv2D>) {
          need_image("Conv2D");
          if (k.out_channels < 1) throw ArchitectureError("Conv2D needs at least one output channel");
          return {k.out_channels, in[1], in[2]};
        } else if constexpr (std::is_same_v<K, MaxPool2D>) {
          need_image("MaxPool2D");
          if (in[1] / 2 < 1 || in[2] / 2 < 1) {
            throw ArchitectureError("MaxPool2D reduces spatial size " + std::to_string(in[1]) + "x" +
                                    std::to_string(in[2]) + " below 1");
          }
          return {in[0], in[1] / 2, in[2] / 2};
        } else if constexpr (std::is_same_v<K, BatchNorm2D>) {
          need_image("BatchNorm2D");
          return in;
        } else if constexpr (std::is_same_v<K, Dropout>) {
          if (!(k.rate >= 0.0 && k.rate < 1.0)) {
            throw ParameterError("Dropout rate must lie in [0, 1), got " + std::to_string(k.rate));
          }
          return in;
        } else if constexpr (std::is_same_v<K, Dense>) {
          if (in.size() != 1) throw ArchitectureError("Dense needs a flat input, got " + to_string(in));
          if (k.out_features < 1) throw ArchitectureError("Dense needs at least one output feature");
          return {k.out_features};
        } else if constexpr (std::is_same_v<K, Softmax>) {
          if (in.size() != 1) throw ArchitectureError("Softmax needs a flat input, got " + to_string(in));
          return in;
        } else if constexpr (std::is_same_v<K, Flatten>) {
          return {volume(in)};
        } else {
          return in;
        }
      },
      kind);
}

}  // namespace mrs
