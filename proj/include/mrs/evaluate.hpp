#pragma once

#include <span>
#include <vector>

#include "mrs/data.hpp"
#include "mrs/metrics.hpp"
#include "mrs/model.hpp"

namespace mrs {

// Stacks sample images [1,48,48] into one [N,1,48,48] batch.
Tensorf stack_images(const Dataset& dataset, std::span<const std::size_t> indices);
Tensorf stack_images(std::span<const Tensorf> images);

// Ground-truth class index (emotion, ethnicity) or age in years for `task`.
// Throws LabelError when the sample's label family does not fit the task.
int label_value(Task task, const Label& label);

// Throws LabelError unless every sample carries the family the model's task
// reads, DatasetError if the set is empty.
void check_labels(const ModelSpec& spec, const Dataset& dataset);

// Inference-mode outputs, batched. For classification heads each row holds
// class probabilities; regression heads return one value per sample.
Tensorf predict(const Model<float>& model, const Tensorf& images, Index batch_size = 256);

std::vector<int> argmax_rows(const Tensorf& probabilities);

// Clamped to [0, 116] as required before any downstream use.
std::vector<double> clamp_ages(const Tensorf& regression_output);

// Classification heads: accuracy, macro-F1 and per-class F1. Age head: MSE
// and MAE on clamped predictions, plus F1 over the four age buckets.
Metrics evaluate(const Model<float>& model, const Dataset& dataset);

}  // namespace mrs
