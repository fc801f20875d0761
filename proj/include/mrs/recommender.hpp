#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mrs/domain.hpp"

namespace mrs {

struct PlaylistKey {
  Emotion emotion;
  AgeBucket age_bucket;
  Ethnicity ethnicity;

  friend auto operator<=>(const PlaylistKey&, const PlaylistKey&) = default;
};

inline constexpr std::size_t kPlaylistKeyCount =
    static_cast<std::size_t>(kNumEmotions) * kNumAgeBuckets * kNumEthnicities;

// "(sad, senior, others)"
std::string key_name(const PlaylistKey& key);

// Dense index in emotion-major order; inverse of all_playlist_keys()[i].
std::size_t key_index(const PlaylistKey& key);
const std::array<PlaylistKey, kPlaylistKeyCount>& all_playlist_keys();

// A validated, total map from the 80 keys to opaque playlist ids.
class PlaylistTable {
 public:
  const std::string& at(const PlaylistKey& key) const { return ids_[key_index(key)]; }
  std::size_t size() const { return ids_.size(); }

 private:
  friend PlaylistTable load_playlist_table(std::string_view json_text);
  std::array<std::string, kPlaylistKeyCount> ids_;
};

// `{"version": 1, "entries": [{"emotion", "age_bucket", "ethnicity",
// "playlist_id"}, ...]}`. Throws ParseError for malformed JSON,
// MissingKeyError / DuplicateKeyError naming the key, and ValidationError
// for unknown tokens, empty ids or a wrong version.
PlaylistTable load_playlist_table(std::string_view json_text);
PlaylistTable load_playlist_table_file(const std::filesystem::path& path);

// Pure lookup; throws RangeError for ages outside [0, 116].
const std::string& select_playlist(const PlaylistTable& table, Emotion emotion, int age, Ethnicity ethnicity);

}  // namespace mrs
