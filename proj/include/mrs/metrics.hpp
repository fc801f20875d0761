#pragma once

#include <optional>
#include <span>
#include <vector>

namespace mrs {

// Columns of the paper-style results tables. Inapplicable metrics stay empty.
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> f1_macro;
  std::optional<double> mse;
  std::optional<double> mae;
  std::vector<double> per_class_f1;  // indexed by class; NaN for absent classes
};

// Accuracy, per-class F1 and macro-F1 from a confusion matrix. Macro-F1
// averages over classes that occur in either labels or predictions.
// Throws DatasetError on empty input, DimensionError on length mismatch,
// LabelError on out-of-range classes.
Metrics classification_metrics(std::span<const int> predicted, std::span<const int> truth, int n_classes);

// Mean squared and mean absolute error.
Metrics regression_metrics(std::span<const double> predicted, std::span<const double> truth);

}  // namespace mrs
