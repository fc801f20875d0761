#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrs/model.hpp"

namespace mrs {

// File layout: "MRSM", version byte, u32 little-endian JSON length, JSON
// metadata (spec + tensor manifest), then float32 little-endian tensor data
// in manifest order.
inline constexpr std::uint8_t kModelFormatVersion = 1;

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);  // throws FormatError

std::vector<std::uint8_t> serialize_model(const Model<float>& model);

// Errors are distinct: FormatError (magic, version, metadata),
// TruncationError (data shorter than the manifest), ShapeMismatchError
// (manifest disagrees with the architecture).
Model<float> deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const Model<float>& model, const std::filesystem::path& path);
Model<float> load_model(const std::filesystem::path& path);  // errors name the file

}  // namespace mrs
