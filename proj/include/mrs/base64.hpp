#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mrs::base64 {

std::string encode(std::string_view bytes);
// Standard alphabet, padding optional, whitespace ignored. Throws
// ParseError on any other character.
std::vector<std::uint8_t> decode(std::string_view text);

}  // namespace mrs::base64
