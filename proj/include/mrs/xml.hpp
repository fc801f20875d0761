#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mrs::xml {

// Just enough XML for cascade files: elements, attributes, character data,
// comments, processing instructions and DOCTYPE (both skipped).
struct Node {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string text;            // concatenated character data directly inside
  std::vector<Node> children;
  std::size_t offset = 0;      // byte offset of the opening '<'

  const Node* child(std::string_view name) const;
  const Node& required_child(std::string_view name) const;  // throws ParseError
  const std::string* attribute(std::string_view name) const;
};

// Returns the document element. Throws ParseError carrying the byte offset
// of the first malformed construct.
Node parse(std::string_view text);

}  // namespace mrs::xml
