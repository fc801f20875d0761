#include "mrs/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mrs/errors.hpp"

namespace mrs {

Metrics classification_metrics(std::span<const int> predicted, std::span<const int> truth, int n_classes) {
  if (predicted.size() != truth.size()) {
    throw DimensionError(std::to_string(predicted.size()) + " predictions for " + std::to_string(truth.size()) +
                         " labels");
  }
  if (truth.empty()) throw DatasetError("cannot score an empty set");
  if (n_classes < 1) throw ParameterError("need at least one class");

  const auto k = static_cast<std::size_t>(n_classes);
  std::vector<std::size_t> confusion(k * k, 0);  // [truth][predicted]
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
      throw LabelError("class index outside [0, " + std::to_string(n_classes) + ") at position " + std::to_string(i));
    }
    ++confusion[static_cast<std::size_t>(t) * k + static_cast<std::size_t>(p)];
  }

  Metrics m;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) correct += confusion[c * k + c];
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());

  double f1_sum = 0;
  int present = 0;
  m.per_class_f1.assign(k, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += confusion[c * k + j];
      col += confusion[j * k + c];
    }
    if (row == 0 && col == 0) continue;
    const double tp = static_cast<double>(confusion[c * k + c]);
    // F1 = 2TP / (2TP + FP + FN) = 2TP / (row + col)
    m.per_class_f1[c] = 2 * tp / static_cast<double>(row + col);
    f1_sum += m.per_class_f1[c];
    ++present;
  }
  m.f1_macro = f1_sum / present;
  return m;
}

Metrics regression_metrics(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError(std::to_string(predicted.size()) + " predictions for " + std::to_string(truth.size()) +
                         " targets");
  }
  if (truth.empty()) throw DatasetError("cannot score an empty set");
  double se = 0, ae = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = predicted[i] - truth[i];
    se += e * e;
    ae += std::abs(e);
  }
  Metrics m;
  m.mse = se / static_cast<double>(truth.size());
  m.mae = ae / static_cast<double>(truth.size());
  return m;
}

}  // namespace mrs
