#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <vector>

namespace mrs {

struct WeightedRect {
  int x = 0, y = 0, w = 0, h = 0;
  double weight = 0.0;
};

struct HaarFeature {
  std::vector<WeightedRect> rects;  // 2 or 3 in published files
};

// Depth-1 tree: feature value < threshold * std picks left_value.
struct Stump {
  HaarFeature feature;
  double threshold = 0.0;
  double left_value = 0.0;
  double right_value = 0.0;
};

struct Stage {
  double threshold = 0.0;
  std::vector<Stump> weak_classifiers;
};

struct Cascade {
  int window_width = 0;
  int window_height = 0;
  std::vector<Stage> stages;

  std::size_t stage_count() const { return stages.size(); }
  std::size_t weak_classifier_count() const;
};

// Accepts both the current OpenCV layout (<cascade> with <stages> and a
// shared <features> table) and the older <size>/<trees> layout. Throws
// ParseError on malformed XML or missing fields, FormatError on
// unsupported content (deeper trees, tilted features, rectangles outside
// the base window, no stages).
Cascade parse_cascade(std::string_view xml_text);
Cascade load_cascade(const std::filesystem::path& path);

}  // namespace mrs
