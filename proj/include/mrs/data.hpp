#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mrs/domain.hpp"
#include "mrs/image.hpp"
#include "mrs/tensor.hpp"

namespace mrs {

inline constexpr Index kImageSize = 48;

struct EmotionLabel {
  Emotion emotion;
  friend bool operator==(const EmotionLabel&, const EmotionLabel&) = default;
};

struct AgeEthnicityLabel {
  int age;
  Ethnicity ethnicity;
  friend bool operator==(const AgeEthnicityLabel&, const AgeEthnicityLabel&) = default;
};

using Label = std::variant<EmotionLabel, AgeEthnicityLabel>;

enum class LabelFamily { Emotion, AgeEthnicity };

// A normalized [1,48,48] image in [0,1] and its label.
struct Sample {
  Tensorf image;
  Label label;
};

struct Dataset {
  LabelFamily family = LabelFamily::Emotion;
  std::vector<Sample> samples;
  std::size_t skipped_rows = 0;  // rows rejected during loading

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// Whitespace-separated integers in [0,255] reshaped row-major to
// [height, width]. Throws ParseError / RangeError.
Tensord parse_pixel_string(std::string_view s, Index width, Index height);

// Divides by 255. Throws RangeError on values outside [0,255].
Tensord normalize(const Tensord& image);

// Maps FER-2013's native 0-6 codes onto the four retained emotions. Public
// copies disagree on code order, so this is configuration.
struct FerLabelMap {
  std::array<std::string, 7> native_names;            // index = native code
  std::array<std::optional<Emotion>, 7> to_emotion;   // nullopt = discarded

  // 0 angry, 1 disgust, 2 fear, 3 happy, 4 sad, 5 surprise, 6 neutral.
  static FerLabelMap canonical();
  std::optional<int> native_code(std::string_view class_name) const;
};

enum class Split { Train, Test };

struct LoadOptions {
  // Rethrow the first row error instead of skipping and counting it.
  bool strict = false;
};

// FER-2013 from either a CSV (`emotion,pixels[,usage]`) or a directory tree
// `<root>/train|test/<class-name>/*.png`. In CSV form, rows whose usage is
// "Training" form the train split and every other usage the test split; a
// CSV without a usage column puts every row in both.
Dataset load_fer2013(const std::filesystem::path& path, Split split,
                     const FerLabelMap& map = FerLabelMap::canonical(), const LoadOptions& options = {});

// Age/Gender/Ethnicity CSV (`age,ethnicity,gender,img_name,pixels`). Gender
// and img_name are dropped.
Dataset load_age_ethnicity(const std::filesystem::path& path, const LoadOptions& options = {});

// Parses one CSV data row; exposed for testing. Throws on invalid rows.
AgeEthnicityLabel parse_age_ethnicity_label(std::string_view age, std::string_view ethnicity);

// Shuffled, disjoint, exhaustive partition; deterministic under `seed`.
// Test size is round(n * test_fraction), clamped to [1, n-1].
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// Deterministic subsample of at most `limit` samples (order preserved).
Dataset limit_samples(const Dataset& dataset, std::size_t limit, std::uint64_t seed);

// Per-class counts for classification labels of `task`-like families.
std::vector<std::size_t> emotion_counts(const Dataset& dataset);
std::vector<std::size_t> ethnicity_counts(const Dataset& dataset);

// Minimal RFC-4180 field splitter (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(std::string_view line);

// Converts a decoded grayscale image of any size to a normalized sample
// tensor, resampling bilinearly to 48x48 when needed.
Tensorf image_to_sample(const GrayImage& image);

}  // namespace mrs
