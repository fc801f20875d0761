#include "mrs/pipeline.hpp"

#include <future>

#include "mrs/data.hpp"
#include "mrs/errors.hpp"
#include "mrs/evaluate.hpp"
#include "mrs/serialize.hpp"

namespace mrs {

namespace {

void check_slot(const Model<float>& m, Task task, Index outputs) {
  const ModelSpec& s = m.spec();
  if (s.task != task) {
    throw ConfigError("model '" + s.name + "' predicts " + task_name(s.task) + ", expected " + task_name(task));
  }
  const Shape out = infer_shapes(s).back();
  if (out != Shape{outputs}) {
    throw ConfigError("model '" + s.name + "' has output " + to_string(out) + ", expected [" +
                      std::to_string(outputs) + "]");
  }
  if (s.input_shape != Shape{1, kImageSize, kImageSize}) {
    throw ConfigError("model '" + s.name + "' expects input " + to_string(s.input_shape));
  }
}

}  // namespace

Predictor::Predictor(Model<float> emotion, Model<float> age, Model<float> ethnicity, Cascade cascade,
                     DetectParams detect)
    : emotion_(std::move(emotion)), age_(std::move(age)), ethnicity_(std::move(ethnicity)),
      cascade_(std::move(cascade)), detect_(detect) {
  check_slot(emotion_, Task::Emotion, kNumEmotions);
  check_slot(age_, Task::Age, 1);
  check_slot(ethnicity_, Task::Ethnicity, kNumEthnicities);
}

Predictor Predictor::load(const ModelPaths& models, const std::filesystem::path& cascade, DetectParams detect) {
  auto load_slot = [](const std::filesystem::path& p, Task task, Index outputs) {
    Model<float> m = load_model(p);
    try {
      check_slot(m, task, outputs);
    } catch (const ConfigError& e) {
      throw ConfigError(p.string() + ": " + e.what());
    }
    return m;
  };
  Model<float> e = load_slot(models.emotion, Task::Emotion, kNumEmotions);
  Model<float> a = load_slot(models.age, Task::Age, 1);
  Model<float> t = load_slot(models.ethnicity, Task::Ethnicity, kNumEthnicities);
  Cascade c;
  try {
    c = load_cascade(cascade);
  } catch (const Error& err) {
    throw ConfigError(cascade.string() + ": " + err.what());
  }
  return Predictor(std::move(e), std::move(a), std::move(t), std::move(c), detect);
}

PredictionTriple Predictor::classify(const GrayImage& face48, bool parallel) const {
  if (face48.width != kImageSize || face48.height != kImageSize) {
    throw DimensionError("classify expects a 48x48 crop, got " + std::to_string(face48.width) + "x" +
                         std::to_string(face48.height));
  }
  const Tensorf x = image_to_sample(face48).reshaped({1, 1, kImageSize, kImageSize});
  auto run = [&x](const Model<float>& m) { return m.infer(x); };

  Tensorf pe, pa, pt;
  if (parallel) {
    auto fe = std::async(std::launch::async, run, std::cref(emotion_));
    auto ft = std::async(std::launch::async, run, std::cref(ethnicity_));
    pa = run(age_);
    pe = fe.get();
    pt = ft.get();
  } else {
    pe = run(emotion_);
    pa = run(age_);
    pt = run(ethnicity_);
  }

  PredictionTriple r;
  for (int i = 0; i < kNumEmotions; ++i) r.emotion_probabilities[i] = pe[i];
  for (int i = 0; i < kNumEthnicities; ++i) r.ethnicity_probabilities[i] = pt[i];
  r.emotion = static_cast<Emotion>(argmax_rows(pe).front());
  r.ethnicity = static_cast<Ethnicity>(argmax_rows(pt).front());
  r.age = clamp_age(pa[0]);
  return r;
}

std::vector<FaceBox> Predictor::detect(const GrayImage& frame) const { return detect_faces(cascade_, frame, detect_); }

PredictionTriple Predictor::predict(const GrayImage& frame, bool parallel) const {
  const FaceBox face = select_primary_face(detect(frame));
  PredictionTriple r = classify(crop_resize(frame, face, kImageSize), parallel);
  r.face = face;
  return r;
}

PredictionTriple Predictor::predict(std::span<const std::uint8_t> encoded, bool parallel) const {
  return predict(decode_gray(encoded), parallel);
}

}  // namespace mrs
