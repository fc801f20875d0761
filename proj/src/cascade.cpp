#include "mrs/cascade.hpp"

#include <cctype>
#include <charconv>
#include <string>

#include "mrs/errors.hpp"
#include "mrs/image.hpp"
#include "mrs/xml.hpp"

namespace mrs {

std::size_t Cascade::weak_classifier_count() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.weak_classifiers.size();
  return n;
}

namespace {

std::vector<double> numbers_in(const xml::Node& node) {
  std::vector<double> out;
  const std::string& t = node.text;
  const char* p = t.data();
  const char* const e = t.data() + t.size();
  while (p < e) {
    while (p < e && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (p == e) break;
    double v = 0;
    const auto [end, ec] = std::from_chars(p, e, v);
    if (ec != std::errc()) throw ParseError("<" + node.name + "> holds a non-numeric value", node.offset);
    out.push_back(v);
    p = end;
  }
  return out;
}

double number(const xml::Node& node) {
  const auto v = numbers_in(node);
  if (v.size() != 1) throw ParseError("<" + node.name + "> should hold one number", node.offset);
  return v[0];
}

int integer(const xml::Node& node) {
  const double v = number(node);
  if (v != static_cast<int>(v)) throw ParseError("<" + node.name + "> should hold an integer", node.offset);
  return static_cast<int>(v);
}

HaarFeature parse_feature(const xml::Node& node, int win_w, int win_h) {
  if (const xml::Node* tilted = node.child("tilted"); tilted && integer(*tilted) != 0) {
    throw FormatError("tilted Haar features are not supported (element at byte " + std::to_string(node.offset) + ")");
  }
  HaarFeature f;
  for (const auto& r : node.required_child("rects").children) {
    const auto v = numbers_in(r);
    if (v.size() != 5) throw ParseError("a feature rectangle needs 5 numbers", r.offset);
    WeightedRect rect{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3]),
                      v[4]};
    if (rect.w <= 0 || rect.h <= 0 || rect.x < 0 || rect.y < 0 || rect.x + rect.w > win_w ||
        rect.y + rect.h > win_h) {
      throw FormatError("feature rectangle " + std::to_string(rect.x) + "," + std::to_string(rect.y) + " " +
                        std::to_string(rect.w) + "x" + std::to_string(rect.h) + " lies outside the " +
                        std::to_string(win_w) + "x" + std::to_string(win_h) + " window (byte " +
                        std::to_string(r.offset) + ")");
    }
    f.rects.push_back(rect);
  }
  if (f.rects.empty()) throw ParseError("feature has no rectangles", node.offset);
  return f;
}

Cascade parse_current(const xml::Node& root) {
  if (const xml::Node* ft = root.child("featureType"); ft && ft->text.find("HAAR") == std::string::npos) {
    throw FormatError("only HAAR feature cascades are supported");
  }
  Cascade c;
  c.window_width = integer(root.required_child("width"));
  c.window_height = integer(root.required_child("height"));
  if (c.window_width <= 0 || c.window_height <= 0) throw FormatError("cascade window size must be positive");

  std::vector<HaarFeature> features;
  for (const auto& f : root.required_child("features").children) {
    features.push_back(parse_feature(f, c.window_width, c.window_height));
  }
  for (const auto& s : root.required_child("stages").children) {
    Stage stage;
    stage.threshold = number(s.required_child("stageThreshold"));
    for (const auto& wc : s.required_child("weakClassifiers").children) {
      const xml::Node& nodes_el = wc.required_child("internalNodes");
      const auto nodes = numbers_in(nodes_el);
      const auto leaves = numbers_in(wc.required_child("leafValues"));
      if (nodes.size() > 4 || leaves.size() > 2) {
        throw FormatError("weak classifier at byte " + std::to_string(wc.offset) +
                          " is deeper than a stump; only depth-1 trees are supported");
      }
      if (nodes.size() != 4 || leaves.size() != 2) throw ParseError("stump needs 4 node values and 2 leaves", wc.offset);
      const auto idx = static_cast<long>(nodes[2]);
      if (idx < 0 || static_cast<std::size_t>(idx) >= features.size()) {
        throw ParseError("feature index " + std::to_string(idx) + " out of range", nodes_el.offset);
      }
      stage.weak_classifiers.push_back(Stump{features[static_cast<std::size_t>(idx)], nodes[3], leaves[0], leaves[1]});
    }
    if (stage.weak_classifiers.empty()) throw FormatError("stage at byte " + std::to_string(s.offset) + " is empty");
    c.stages.push_back(std::move(stage));
  }
  return c;
}

Cascade parse_legacy(const xml::Node& root) {
  Cascade c;
  const auto size = numbers_in(root.required_child("size"));
  if (size.size() != 2) throw ParseError("<size> needs width and height", root.required_child("size").offset);
  c.window_width = static_cast<int>(size[0]);
  c.window_height = static_cast<int>(size[1]);
  if (c.window_width <= 0 || c.window_height <= 0) throw FormatError("cascade window size must be positive");

  for (const auto& s : root.required_child("stages").children) {
    Stage stage;
    stage.threshold = number(s.required_child("stage_threshold"));
    for (const auto& tree : s.required_child("trees").children) {
      if (tree.children.size() != 1) {
        throw FormatError("tree at byte " + std::to_string(tree.offset) +
                          " has several nodes; only depth-1 trees are supported");
      }
      const xml::Node& node = tree.children.front();
      if (node.child("left_node") || node.child("right_node")) {
        throw FormatError("tree at byte " + std::to_string(tree.offset) + " is deeper than a stump");
      }
      Stump st;
      st.feature = parse_feature(node.required_child("feature"), c.window_width, c.window_height);
      st.threshold = number(node.required_child("threshold"));
      st.left_value = number(node.required_child("left_val"));
      st.right_value = number(node.required_child("right_val"));
      stage.weak_classifiers.push_back(std::move(st));
    }
    if (stage.weak_classifiers.empty()) throw FormatError("stage at byte " + std::to_string(s.offset) + " is empty");
    c.stages.push_back(std::move(stage));
  }
  return c;
}

}  // namespace

Cascade parse_cascade(std::string_view xml_text) {
  const xml::Node doc = xml::parse(xml_text);
  // Both layouts wrap the classifier in one element under <opencv_storage>.
  const xml::Node* root = &doc;
  if (doc.name == "opencv_storage") {
    if (doc.children.size() != 1) throw ParseError("expected exactly one cascade under <opencv_storage>", doc.offset);
    root = &doc.children.front();
  }
  Cascade c = root->child("features") ? parse_current(*root) : parse_legacy(*root);
  if (c.stages.empty()) throw FormatError("cascade has no stages");
  return c;
}

Cascade load_cascade(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_cascade(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace mrs
