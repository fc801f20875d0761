#include "mrs/evaluate.hpp"

#include <algorithm>
#include <numeric>

#include "mrs/errors.hpp"

namespace mrs {

Tensorf stack_images(const Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DatasetError("cannot stack an empty batch");
  const Shape& s = dataset.samples[indices.front()].image.shape();
  Shape shape{static_cast<Index>(indices.size())};
  shape.insert(shape.end(), s.begin(), s.end());
  Tensorf batch(shape);
  const Index per = volume(s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Tensorf& img = dataset.samples[indices[i]].image;
    if (img.shape() != s) throw DimensionError("sample " + std::to_string(indices[i]) + " has shape " + to_string(img.shape()));
    batch.values().segment(static_cast<Index>(i) * per, per) = img.values();
  }
  return batch;
}

Tensorf stack_images(std::span<const Tensorf> images) {
  if (images.empty()) throw DatasetError("cannot stack an empty batch");
  const Shape& s = images.front().shape();
  Shape shape{static_cast<Index>(images.size())};
  shape.insert(shape.end(), s.begin(), s.end());
  Tensorf batch(shape);
  const Index per = volume(s);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].shape() != s) throw DimensionError("image " + std::to_string(i) + " has shape " + to_string(images[i].shape()));
    batch.values().segment(static_cast<Index>(i) * per, per) = images[i].values();
  }
  return batch;
}

int label_value(Task task, const Label& label) {
  if (task == Task::Emotion) {
    if (const auto* e = std::get_if<EmotionLabel>(&label)) return static_cast<int>(e->emotion);
    throw LabelError("the emotion model needs emotion labels, got age/ethnicity labels");
  }
  const auto* ae = std::get_if<AgeEthnicityLabel>(&label);
  if (!ae) throw LabelError("the " + task_name(task) + " model needs age/ethnicity labels, got emotion labels");
  return task == Task::Age ? ae->age : static_cast<int>(ae->ethnicity);
}

void check_labels(const ModelSpec& spec, const Dataset& dataset) {
  if (dataset.empty()) throw DatasetError("dataset is empty");
  for (const auto& s : dataset.samples) label_value(spec.task, s.label);
  if (const auto* c = std::get_if<ClassificationHead>(&spec.head)) {
    for (const auto& s : dataset.samples) {
      if (label_value(spec.task, s.label) >= c->n_classes) {
        throw LabelError("label outside the " + std::to_string(c->n_classes) + "-class head");
      }
    }
  }
}

Tensorf predict(const Model<float>& model, const Tensorf& images, Index batch_size) {
  const Index n = images.dim(0);
  const Index per = images.size() / n;
  Tensorf out;
  Index out_per = 0;
  for (Index start = 0; start < n; start += batch_size) {
    const Index m = std::min(batch_size, n - start);
    Shape shape = images.shape();
    shape[0] = m;
    const Tensorf chunk(shape, images.values().segment(start * per, m * per));
    const Tensorf y = model.infer(chunk);
    if (out.empty()) {
      out_per = y.size() / m;
      out = Tensorf({n, out_per});
    }
    out.values().segment(start * out_per, m * out_per) = y.values();
  }
  return out;
}

std::vector<int> argmax_rows(const Tensorf& p) {
  const Index n = p.dim(0), k = p.size() / p.dim(0);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    Index best = 0;
    p.values().segment(r * k, k).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

std::vector<double> clamp_ages(const Tensorf& y) {
  std::vector<double> out(static_cast<std::size_t>(y.size()));
  for (Index i = 0; i < y.size(); ++i) {
    out[static_cast<std::size_t>(i)] = std::clamp(static_cast<double>(y[i]), double(kMinAge), double(kMaxAge));
  }
  return out;
}

Metrics evaluate(const Model<float>& model, const Dataset& dataset) {
  check_labels(model.spec(), dataset);
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Tensorf out = predict(model, stack_images(dataset, all));
  std::vector<int> truth;
  for (const auto& s : dataset.samples) truth.push_back(label_value(model.spec().task, s.label));

  if (const auto* c = std::get_if<ClassificationHead>(&model.spec().head)) {
    return classification_metrics(argmax_rows(out), truth, static_cast<int>(c->n_classes));
  }
  const std::vector<double> ages = clamp_ages(out);
  const std::vector<double> true_ages(truth.begin(), truth.end());
  Metrics m = regression_metrics(ages, true_ages);
  std::vector<int> pb, tb;
  for (std::size_t i = 0; i < ages.size(); ++i) {
    pb.push_back(static_cast<int>(bucket_age(clamp_age(ages[i]))));
    tb.push_back(static_cast<int>(bucket_age(truth[i])));
  }
  const Metrics buckets = classification_metrics(pb, tb, kNumAgeBuckets);
  m.f1_macro = buckets.f1_macro;
  m.per_class_f1 = buckets.per_class_f1;
  return m;
}

}  // namespace mrs
