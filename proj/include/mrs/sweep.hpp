#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrs/data.hpp"
#include "mrs/metrics.hpp"
#include "mrs/model.hpp"
#include "mrs/train.hpp"

namespace mrs {

struct Trial {
  int n_conv = 0;
  int n_pool = 0;
};

struct SweepRow {
  int trial = 0;  // 1-based, input order
  Trial shape;
  std::optional<Metrics> metrics;  // empty when infeasible
  std::string note;                // why a trial was infeasible
};

using SweepCallback = std::function<void(const SweepRow&)>;

// Trains and scores one model per trial. Trial i (0-based) trains with seed
// config.seed + i, so repeated (conv, pool) pairs are independent runs.
// Illegal architectures produce an infeasible row and the sweep continues.
std::vector<SweepRow> layer_sweep(Task task, std::span<const Trial> trials, const Dataset& train_set,
                                  const Dataset& test_set, const TrainConfig& config,
                                  const SweepCallback& on_row = {});

// Header `trial,n_conv,n_pool,f1,accuracy,mse,mae`; cells are empty where a
// metric does not apply or the trial was infeasible.
std::string sweep_csv(std::span<const SweepRow> rows);

// The (conv, pool) rows of the paper's three result tables.
std::vector<Trial> paper_trials(Task task);

// Parses "5:2,6:3" style lists. Throws ParameterError.
std::vector<Trial> parse_trials(const std::string& text);

}  // namespace mrs
