#include "mrs/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "mrs/errors.hpp"
#include "mrs/evaluate.hpp"
#include "mrs/losses.hpp"
#include "mrs/random.hpp"

namespace mrs {

void validate_config(const TrainConfig& c) {
  if (c.epochs < 1) throw ParameterError("epochs must be positive");
  if (c.batch_size < 2) throw ParameterError("batch size must be at least 2 (batch normalization)");
  if (!(c.learning_rate >= 0) || !std::isfinite(c.learning_rate)) {
    throw ParameterError("learning rate must be a finite non-negative number");
  }
  if (!(c.validation_fraction >= 0 && c.validation_fraction < 1)) {
    throw ParameterError("validation fraction must lie in [0, 1)");
  }
}

namespace {

Tensorf targets(const ModelSpec& spec, const Dataset& ds, std::span<const std::size_t> idx) {
  const auto n = static_cast<Index>(idx.size());
  if (const auto* c = std::get_if<ClassificationHead>(&spec.head)) {
    Tensorf t({n, c->n_classes});
    for (Index i = 0; i < n; ++i) t.at(i, label_value(spec.task, ds.samples[idx[static_cast<std::size_t>(i)]].label)) = 1;
    return t;
  }
  Tensorf t({n, 1});
  for (Index i = 0; i < n; ++i) {
    t[i] = static_cast<float>(label_value(spec.task, ds.samples[idx[static_cast<std::size_t>(i)]].label));
  }
  return t;
}

}  // namespace

History train(Model<float>& model, const Dataset& dataset, const TrainConfig& config, const EpochCallback& on_epoch) {
  validate_config(config);
  check_labels(model.spec(), dataset);
  const ModelSpec& spec = model.spec();
  const bool classification = std::holds_alternative<ClassificationHead>(spec.head);

  Dataset train_set, validation_set;
  if (config.validation_fraction > 0 && dataset.size() >= 2) {
    std::tie(train_set, validation_set) = split(dataset, config.validation_fraction, mix_seed(config.seed, 0x7a1));
  } else {
    train_set = dataset;
  }
  if (train_set.size() < 2) throw DatasetError("need at least two training samples");

  const OptimizerConfig opt{config.optimizer, config.learning_rate};
  OptimizerState<float> state;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  History history;
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order.begin(), order.end());

    double loss_sum = 0;
    std::size_t batches = 0, correct = 0, seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t m = std::min(batch, order.size() - start);
      if (m < 2) break;
      const std::span<const std::size_t> idx(order.data() + start, m);
      const Tensorf x = stack_images(train_set, idx);
      const Tensorf t = targets(spec, train_set, idx);
      const Tensorf y = model.forward(x, ops::Mode::Train, mix_seed(config.seed ^ 0xd20u, ++step));

      Tensorf grad;
      if (spec.loss == LossKind::CategoricalCrossEntropy) {
        loss_sum += losses::categorical_cross_entropy(y, t);
        grad = losses::categorical_cross_entropy_backward(y, t);
      } else {
        loss_sum += losses::mse(y, t);
        grad = losses::mse_backward(y, t);
      }
      if (!std::isfinite(loss_sum)) throw NumericalError("training diverged at epoch " + std::to_string(epoch));
      model.backward(grad);
      const auto params = model.parameters();
      const auto grads = model.gradients();
      optimizer_step<float>(params, grads, state, opt);

      if (classification) {
        const auto pred = argmax_rows(y), truth = argmax_rows(t);
        for (std::size_t i = 0; i < m; ++i) correct += pred[i] == truth[i];
        seen += m;
      }
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (classification && seen) rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    if (!validation_set.empty()) rec.validation = evaluate(model, validation_set);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(rec);
    if (on_epoch) on_epoch(history.back());
  }
  return history;
}

}  // namespace mrs
