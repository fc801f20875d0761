#include "mrs/recommender.hpp"

#include <optional>

#include "json.hpp"
#include "mrs/errors.hpp"
#include "mrs/image.hpp"

namespace mrs {

using nlohmann::json;

std::string key_name(const PlaylistKey& k) {
  return "(" + std::string(token(k.emotion)) + ", " + std::string(token(k.age_bucket)) + ", " +
         std::string(token(k.ethnicity)) + ")";
}

std::size_t key_index(const PlaylistKey& k) {
  return (static_cast<std::size_t>(k.emotion) * kNumAgeBuckets + static_cast<std::size_t>(k.age_bucket)) *
             kNumEthnicities +
         static_cast<std::size_t>(k.ethnicity);
}

const std::array<PlaylistKey, kPlaylistKeyCount>& all_playlist_keys() {
  static const auto keys = [] {
    std::array<PlaylistKey, kPlaylistKeyCount> out{};
    for (Emotion e : kAllEmotions) {
      for (AgeBucket b : kAllAgeBuckets) {
        for (Ethnicity t : kAllEthnicities) {
          const PlaylistKey k{e, b, t};
          out[key_index(k)] = k;
        }
      }
    }
    return out;
  }();
  return keys;
}

namespace {

std::string field(const json& entry, const char* name, std::size_t i) {
  const auto it = entry.find(name);
  if (it == entry.end() || !it->is_string()) {
    throw ValidationError("entry " + std::to_string(i) + ": missing string field '" + name + "'");
  }
  return it->get<std::string>();
}

template <typename T>
T parse_token(std::optional<T> v, const std::string& text, const char* what, std::size_t i) {
  if (!v) throw ValidationError("entry " + std::to_string(i) + ": unknown " + what + " '" + text + "'");
  return *v;
}

}  // namespace

PlaylistTable load_playlist_table(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("playlist table is not valid JSON: ") + e.what(), e.byte);
  }
  if (!doc.is_object()) throw ValidationError("playlist table must be a JSON object");
  if (!doc.contains("version") || doc["version"] != 1) throw ValidationError("playlist table needs \"version\": 1");
  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw ValidationError("playlist table needs an \"entries\" array");
  }

  PlaylistTable table;
  std::array<bool, kPlaylistKeyCount> seen{};
  const json& entries = doc["entries"];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const json& e = entries[i];
    if (!e.is_object()) throw ValidationError("entry " + std::to_string(i) + " is not an object");
    const std::string em = field(e, "emotion", i), ab = field(e, "age_bucket", i), et = field(e, "ethnicity", i);
    const PlaylistKey key{parse_token(parse_emotion(em), em, "emotion", i),
                          parse_token(parse_age_bucket(ab), ab, "age_bucket", i),
                          parse_token(parse_ethnicity(et), et, "ethnicity", i)};
    const std::string id = field(e, "playlist_id", i);
    if (id.empty()) throw ValidationError("entry " + std::to_string(i) + " " + key_name(key) + ": empty playlist_id");
    const std::size_t k = key_index(key);
    if (seen[k]) throw DuplicateKeyError("duplicate playlist key " + key_name(key), key_name(key));
    seen[k] = true;
    table.ids_[k] = id;
  }
  for (const auto& key : all_playlist_keys()) {
    if (!seen[key_index(key)]) throw MissingKeyError("missing playlist key " + key_name(key), key_name(key));
  }
  return table;
}

PlaylistTable load_playlist_table_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("playlist table " + path.string() + " does not exist");
  const auto bytes = read_file_bytes(path);
  return load_playlist_table(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

const std::string& select_playlist(const PlaylistTable& table, Emotion emotion, int age, Ethnicity ethnicity) {
  return table.at(PlaylistKey{emotion, bucket_age(age), ethnicity});
}

}  // namespace mrs
