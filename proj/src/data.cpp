#include "mrs/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "mrs/detect.hpp"
#include "mrs/errors.hpp"
#include "mrs/log.hpp"
#include "mrs/random.hpp"

namespace mrs {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_int_field(std::string_view field, const char* what) {
  field = trim(field);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    throw ParseError(std::string(what) + ": '" + std::string(field) + "' is not an integer");
  }
  return v;
}

Tensorf to_sample(const Tensord& pixels) {
  return normalize(pixels).reshaped({1, kImageSize, kImageSize}).cast<float>();
}

// Reads a header row and returns column name -> index.
std::map<std::string, std::size_t> header_columns(const std::string& line) {
  std::map<std::string, std::size_t> cols;
  const auto fields = split_csv_line(line);
  for (std::size_t i = 0; i < fields.size(); ++i) cols[std::string(trim(fields[i]))] = i;
  return cols;
}

std::size_t require_column(const std::map<std::string, std::size_t>& cols, const std::string& name,
                           const std::filesystem::path& path) {
  const auto it = cols.find(name);
  if (it == cols.end()) throw ParseError(path.string() + ": missing required column '" + name + "'");
  return it->second;
}

template <typename RowFn>
std::size_t for_each_row(std::istream& in, const std::filesystem::path& path, std::size_t columns,
                         const LoadOptions& options, RowFn&& fn) {
  std::size_t skipped = 0;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    try {
      const auto fields = split_csv_line(line);
      if (fields.size() < columns) {
        throw ParseError("expected " + std::to_string(columns) + " fields, got " + std::to_string(fields.size()));
      }
      fn(fields);
    } catch (const Error& e) {
      if (options.strict) throw;
      ++skipped;
      log::warn("data", path.string() + ":" + std::to_string(line_no) + ": skipping row: " + e.what());
    }
  }
  return skipped;
}

}  // namespace

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

Tensord parse_pixel_string(std::string_view s, Index width, Index height) {
  const Index expected = width * height;
  Tensord out({height, width});
  Index count = 0;
  std::size_t pos = 0;
  while (true) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos >= s.size()) break;
    std::size_t end = pos;
    while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
    const std::string_view tok = s.substr(pos, end - pos);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("pixel token '" + std::string(tok) + "' is not an integer", pos);
    }
    if (v < 0 || v > 255) throw RangeError("pixel value " + std::to_string(v) + " outside [0, 255]");
    if (count < expected) out[count] = static_cast<double>(v);
    ++count;
    pos = end;
  }
  if (count != expected) {
    throw ParseError("pixel string has " + std::to_string(count) + " tokens, expected " + std::to_string(expected) +
                     " (" + std::to_string(width) + "x" + std::to_string(height) + ")");
  }
  return out;
}

Tensord normalize(const Tensord& image) {
  if (image.size() > 0 && ((image.values() < 0.0).any() || (image.values() > 255.0).any())) {
    throw RangeError("normalize: pixel values must lie in [0, 255]");
  }
  return Tensord(image.shape(), image.values() / 255.0);
}

FerLabelMap FerLabelMap::canonical() {
  FerLabelMap m;
  m.native_names = {"angry", "disgust", "fear", "happy", "sad", "surprise", "neutral"};
  m.to_emotion = {Emotion::Angry, std::nullopt, std::nullopt, Emotion::Happy,
                  Emotion::Sad,   std::nullopt, Emotion::Neutral};
  return m;
}

std::optional<int> FerLabelMap::native_code(std::string_view class_name) const {
  for (std::size_t i = 0; i < native_names.size(); ++i) {
    if (native_names[i] == class_name) return static_cast<int>(i);
  }
  return std::nullopt;
}

namespace {

Dataset load_fer_csv(const std::filesystem::path& path, Split split, const FerLabelMap& map,
                     const LoadOptions& options) {
  Dataset ds;
  ds.family = LabelFamily::Emotion;
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header) || trim(header).empty()) {
    log::warn("data", path.string() + ": empty file, no samples loaded");
    return ds;
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto cols = header_columns(header);
  const std::size_t emotion_col = require_column(cols, "emotion", path);
  const std::size_t pixels_col = require_column(cols, "pixels", path);
  const auto usage_it = cols.find("Usage") != cols.end() ? cols.find("Usage") : cols.find("usage");
  const std::optional<std::size_t> usage_col =
      usage_it == cols.end() ? std::nullopt : std::optional<std::size_t>(usage_it->second);
  const std::size_t needed = std::max({emotion_col, pixels_col, usage_col.value_or(0)}) + 1;

  ds.skipped_rows = for_each_row(in, path, needed, options, [&](const std::vector<std::string>& f) {
    const int code = parse_int_field(f[emotion_col], "emotion");
    if (code < 0 || code > 6) throw RangeError("emotion code " + std::to_string(code) + " outside 0-6");
    if (usage_col) {
      const bool training = trim(f[*usage_col]) == "Training";
      if (training != (split == Split::Train)) return;
    }
    const auto emotion = map.to_emotion[static_cast<std::size_t>(code)];
    if (!emotion) return;  // discarded class
    ds.samples.push_back({to_sample(parse_pixel_string(f[pixels_col], kImageSize, kImageSize)),
                          EmotionLabel{*emotion}});
  });
  return ds;
}

Dataset load_fer_directory(const std::filesystem::path& root, Split split, const FerLabelMap& map,
                           const LoadOptions& options) {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.family = LabelFamily::Emotion;
  const fs::path dir = root / (split == Split::Train ? "train" : "test");
  if (!fs::is_directory(dir)) throw Error(dir.string() + " is not a directory");

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  for (const auto& class_dir : class_dirs) {
    const auto code = map.native_code(class_dir.filename().string());
    if (!code) {
      if (options.strict) throw LabelError("unknown FER class directory " + class_dir.string());
      log::warn("data", "skipping unknown class directory " + class_dir.string());
      continue;
    }
    const auto emotion = map.to_emotion[static_cast<std::size_t>(*code)];
    if (!emotion) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      try {
        ds.samples.push_back({image_to_sample(read_gray_image(file)), EmotionLabel{*emotion}});
      } catch (const Error& e) {
        if (options.strict) throw;
        ++ds.skipped_rows;
        log::warn("data", file.string() + ": skipping image: " + e.what());
      }
    }
  }
  return ds;
}

}  // namespace

Dataset load_fer2013(const std::filesystem::path& path, Split split, const FerLabelMap& map,
                     const LoadOptions& options) {
  if (std::filesystem::is_directory(path)) return load_fer_directory(path, split, map, options);
  return load_fer_csv(path, split, map, options);
}

AgeEthnicityLabel parse_age_ethnicity_label(std::string_view age_field, std::string_view ethnicity_field) {
  const int age = parse_int_field(age_field, "age");
  if (age < kMinAge || age > kMaxAge) throw RangeError("age " + std::to_string(age) + " outside [0, 116]");
  const int eth = parse_int_field(ethnicity_field, "ethnicity");
  if (eth < 0 || eth >= kNumEthnicities) throw RangeError("ethnicity code " + std::to_string(eth) + " outside 0-4");
  return {age, static_cast<Ethnicity>(eth)};
}

Dataset load_age_ethnicity(const std::filesystem::path& path, const LoadOptions& options) {
  Dataset ds;
  ds.family = LabelFamily::AgeEthnicity;
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header) || trim(header).empty()) {
    log::warn("data", path.string() + ": empty file, no samples loaded");
    return ds;
  }
  if (!header.empty() && header.back() == '\r') header.pop_back();
  const auto cols = header_columns(header);
  const std::size_t age_col = require_column(cols, "age", path);
  const std::size_t eth_col = require_column(cols, "ethnicity", path);
  const std::size_t pixels_col = require_column(cols, "pixels", path);
  const std::size_t needed = std::max({age_col, eth_col, pixels_col}) + 1;

  ds.skipped_rows = for_each_row(in, path, needed, options, [&](const std::vector<std::string>& f) {
    const AgeEthnicityLabel label = parse_age_ethnicity_label(f[age_col], f[eth_col]);
    ds.samples.push_back({to_sample(parse_pixel_string(f[pixels_col], kImageSize, kImageSize)), label});
  });
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ParameterError("split: test fraction must lie in (0, 1), got " + std::to_string(test_fraction));
  }
  const std::size_t n = dataset.size();
  if (n < 2) throw DatasetError("split: need at least 2 samples, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction)), 1, n - 1);

  Dataset train, test;
  train.family = test.family = dataset.family;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n - n_test ? train : test).samples.push_back(dataset.samples[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

Dataset limit_samples(const Dataset& dataset, std::size_t limit, std::uint64_t seed) {
  if (limit >= dataset.size()) return dataset;
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  order.resize(limit);
  std::sort(order.begin(), order.end());
  Dataset out;
  out.family = dataset.family;
  out.skipped_rows = dataset.skipped_rows;
  for (std::size_t i : order) out.samples.push_back(dataset.samples[i]);
  return out;
}

std::vector<std::size_t> emotion_counts(const Dataset& dataset) {
  std::vector<std::size_t> counts(kNumEmotions, 0);
  for (const auto& s : dataset.samples) {
    if (const auto* l = std::get_if<EmotionLabel>(&s.label)) ++counts[static_cast<std::size_t>(l->emotion)];
  }
  return counts;
}

std::vector<std::size_t> ethnicity_counts(const Dataset& dataset) {
  std::vector<std::size_t> counts(kNumEthnicities, 0);
  for (const auto& s : dataset.samples) {
    if (const auto* l = std::get_if<AgeEthnicityLabel>(&s.label)) ++counts[static_cast<std::size_t>(l->ethnicity)];
  }
  return counts;
}

Tensorf image_to_sample(const GrayImage& image) {
  const GrayImage img = (image.width == kImageSize && image.height == kImageSize)
                            ? image
                            : crop_resize(image, FaceBox{0, 0, image.width, image.height, 0}, kImageSize);
  Tensorf t({1, kImageSize, kImageSize});
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(img.pixels[static_cast<std::size_t>(i)] / 255.0);
  return t;
}

}  // namespace mrs
