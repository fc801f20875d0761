#include "mrs/xml.hpp"

#include <cctype>

#include "mrs/errors.hpp"

namespace mrs::xml {

const Node* Node::child(std::string_view n) const {
  for (const auto& c : children) {
    if (c.name == n) return &c;
  }
  return nullptr;
}

const Node& Node::required_child(std::string_view n) const {
  if (const Node* c = child(n)) return *c;
  throw ParseError("<" + name + "> has no <" + std::string(n) + "> element", offset);
}

const std::string* Node::attribute(std::string_view n) const {
  for (const auto& [k, v] : attributes) {
    if (k == n) return &v;
  }
  return nullptr;
}

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : s_(text) {}

  Node document() {
    skip_misc();
    if (pos_ >= s_.size() || s_[pos_] != '<') fail("expected a root element");
    Node root = element();
    skip_misc();
    if (pos_ != s_.size()) fail("unexpected content after the root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("malformed XML: " + what, pos_); }

  bool starts_with(std::string_view p) const { return s_.substr(pos_, p.size()) == p; }

  void skip_until(std::string_view terminator) {
    const auto end = s_.find(terminator, pos_);
    if (end == std::string_view::npos) {
      pos_ = s_.size();
      fail("unterminated construct, expected '" + std::string(terminator) + "'");
    }
    pos_ = end + terminator.size();
  }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  // Whitespace, comments, processing instructions, DOCTYPE.
  void skip_misc() {
    while (true) {
      skip_space();
      if (starts_with("<?")) {
        skip_until("?>");
      } else if (starts_with("<!--")) {
        skip_until("-->");
      } else if (starts_with("<!DOCTYPE")) {
        skip_until(">");
      } else {
        return;
      }
    }
  }

  std::string name() {
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == ':') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string decode(std::string_view raw, std::size_t at) const {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out += raw[i];
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) throw ParseError("malformed XML: unterminated entity", at + i);
      const auto ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "lt") out += '<';
      else if (ent == "gt") out += '>';
      else if (ent == "amp") out += '&';
      else if (ent == "quot") out += '"';
      else if (ent == "apos") out += '\'';
      else throw ParseError("malformed XML: unknown entity &" + std::string(ent) + ";", at + i);
      i = semi;
    }
    return out;
  }

  Node element() {
    Node node;
    node.offset = pos_;
    ++pos_;  // '<'
    node.name = name();
    while (true) {
      skip_space();
      if (pos_ >= s_.size()) fail("unterminated start tag <" + node.name + ">");
      if (starts_with("/>")) {
        pos_ += 2;
        return node;
      }
      if (s_[pos_] == '>') {
        ++pos_;
        break;
      }
      std::string key = name();
      skip_space();
      if (pos_ >= s_.size() || s_[pos_] != '=') fail("expected '=' after attribute " + key);
      ++pos_;
      skip_space();
      if (pos_ >= s_.size() || (s_[pos_] != '"' && s_[pos_] != '\'')) fail("expected a quoted attribute value");
      const char quote = s_[pos_++];
      const auto end = s_.find(quote, pos_);
      if (end == std::string_view::npos) {
        pos_ = s_.size();
        fail("unterminated attribute value");
      }
      node.attributes.emplace_back(std::move(key), decode(s_.substr(pos_, end - pos_), pos_));
      pos_ = end + 1;
    }

    while (true) {
      if (pos_ >= s_.size()) fail("missing end tag </" + node.name + ">");
      if (starts_with("</")) {
        pos_ += 2;
        const std::size_t at = pos_;
        const std::string closing = name();
        if (closing != node.name) {
          pos_ = at;
          fail("end tag </" + closing + "> does not match <" + node.name + ">");
        }
        skip_space();
        if (pos_ >= s_.size() || s_[pos_] != '>') fail("expected '>' to close </" + node.name + ">");
        ++pos_;
        return node;
      }
      if (starts_with("<!--")) {
        skip_until("-->");
      } else if (starts_with("<![CDATA[")) {
        pos_ += 9;
        const auto end = s_.find("]]>", pos_);
        if (end == std::string_view::npos) {
          pos_ = s_.size();
          fail("unterminated CDATA section");
        }
        node.text += s_.substr(pos_, end - pos_);
        pos_ = end + 3;
      } else if (starts_with("<?")) {
        skip_until("?>");
      } else if (s_[pos_] == '<') {
        node.children.push_back(element());
      } else {
        const auto end = s_.find('<', pos_);
        const std::size_t stop = end == std::string_view::npos ? s_.size() : end;
        node.text += decode(s_.substr(pos_, stop - pos_), pos_);
        pos_ = stop;
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Node parse(std::string_view text) { return Parser(text).document(); }

}  // namespace mrs::xml
