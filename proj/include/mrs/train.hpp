#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mrs/data.hpp"
#include "mrs/metrics.hpp"
#include "mrs/model.hpp"
#include "mrs/optimizer.hpp"

namespace mrs {

struct TrainConfig {
  int epochs = 15;
  int batch_size = 64;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 42;
  // Share of the data held out for per-epoch validation; 0 trains on all.
  double validation_fraction = 0.2;
};

struct EpochRecord {
  int epoch = 0;                   // 1-based
  double train_loss = 0.0;         // mean over batches
  std::optional<double> train_accuracy;  // classification heads, train mode
  std::optional<Metrics> validation;
  double seconds = 0.0;
};

using History = std::vector<EpochRecord>;
using EpochCallback = std::function<void(const EpochRecord&)>;

// Throws ParameterError for non-positive epochs/batch size/learning rate or
// a validation fraction outside [0, 1).
void validate_config(const TrainConfig& config);

// Mini-batch training in place. Batches are reshuffled each epoch from
// config.seed; a trailing batch of one sample is skipped because batch
// normalization needs two. Throws DatasetError on an empty set and
// LabelError when labels do not match the model's head.
History train(Model<float>& model, const Dataset& dataset, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

}  // namespace mrs
