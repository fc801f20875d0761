#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>

#include "mrs/cascade.hpp"
#include "mrs/detect.hpp"
#include "mrs/domain.hpp"
#include "mrs/image.hpp"
#include "mrs/model.hpp"

namespace mrs {

struct PredictionTriple {
  Emotion emotion = Emotion::Neutral;
  std::array<double, kNumEmotions> emotion_probabilities{};
  int age = 0;  // clamped to [0, 116]
  Ethnicity ethnicity = Ethnicity::White;
  std::array<double, kNumEthnicities> ethnicity_probabilities{};
  FaceBox face;

  friend bool operator==(const PredictionTriple&, const PredictionTriple&) = default;
};

struct ModelPaths {
  std::filesystem::path emotion;
  std::filesystem::path age;
  std::filesystem::path ethnicity;
};

// Detection, cropping and the three classifiers behind one immutable object.
// All methods are const and safe to call from many threads.
class Predictor {
 public:
  // Throws ConfigError when a model's task or head does not fit its slot.
  Predictor(Model<float> emotion, Model<float> age, Model<float> ethnicity, Cascade cascade,
            DetectParams detect = {});

  // Errors from loading name the offending file.
  static Predictor load(const ModelPaths& models, const std::filesystem::path& cascade, DetectParams detect = {});

  // Runs the three models on one 48x48 face crop, concurrently unless
  // `parallel` is false; both give identical results.
  PredictionTriple classify(const GrayImage& face48, bool parallel = true) const;

  // Grayscale frame -> primary face -> classify. Throws NoFaceError.
  PredictionTriple predict(const GrayImage& frame, bool parallel = true) const;
  // Encoded PNG/JPEG/PGM bytes. Throws ImageDecodeError, NoFaceError.
  PredictionTriple predict(std::span<const std::uint8_t> encoded, bool parallel = true) const;

  std::vector<FaceBox> detect(const GrayImage& frame) const;

 private:
  Model<float> emotion_, age_, ethnicity_;
  Cascade cascade_;
  DetectParams detect_;
};

}  // namespace mrs
