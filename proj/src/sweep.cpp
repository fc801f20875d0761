#include "mrs/sweep.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>
#include <system_error>

#include "mrs/errors.hpp"
#include "mrs/evaluate.hpp"

namespace mrs {

std::vector<SweepRow> layer_sweep(Task task, std::span<const Trial> trials, const Dataset& train_set,
                                  const Dataset& test_set, const TrainConfig& config, const SweepCallback& on_row) {
  validate_config(config);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    SweepRow row;
    row.trial = static_cast<int>(i) + 1;
    row.shape = trials[i];
    try {
      const ModelSpec spec = make_spec(task, trials[i].n_conv, trials[i].n_pool);
      TrainConfig c = config;
      c.seed = config.seed + i;
      Model<float> model = build_model<float>(spec, c.seed);
      train(model, train_set, c);
      row.metrics = evaluate(model, test_set);
    } catch (const ArchitectureError& e) {
      row.note = e.what();
    }
    rows.push_back(row);
    if (on_row) on_row(rows.back());
  }
  return rows;
}

namespace {

std::string cell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

}  // namespace

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "trial,n_conv,n_pool,f1,accuracy,mse,mae\n";
  for (const auto& r : rows) {
    out << r.trial << ',' << r.shape.n_conv << ',' << r.shape.n_pool;
    const Metrics m = r.metrics.value_or(Metrics{});
    out << ',' << cell(m.f1_macro) << ',' << cell(m.accuracy) << ',' << cell(m.mse) << ',' << cell(m.mae) << '\n';
  }
  return out.str();
}

std::vector<Trial> paper_trials(Task task) {
  switch (task) {
    case Task::Emotion: return {{5, 2}, {5, 3}, {6, 3}, {6, 4}, {7, 5}};
    case Task::Age: return {{5, 3}, {6, 3}, {6, 4}};
    case Task::Ethnicity: return {{2, 2}, {3, 3}, {3, 3}};
  }
  return {};
}

std::vector<Trial> parse_trials(const std::string& text) {
  std::vector<Trial> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    item = first == std::string::npos ? std::string() : item.substr(first, last - first + 1);
    const auto x = item.find(':');
    Trial t;
    const char* b = item.data();
    const char* e = b + item.size();
    auto whole = [](const char* from, const char* to, int& v) {
      const auto r = std::from_chars(from, to, v);
      return r.ec == std::errc() && r.ptr == to;
    };
    if (x == std::string::npos || !whole(b, b + x, t.n_conv) || !whole(b + x + 1, e, t.n_pool)) {
      throw ParameterError("trial '" + item + "' is not of the form <conv>:<pool>, e.g. 6:3");
    }
    if (t.n_conv < 1 || t.n_pool < 0) {
      throw ParameterError("trial '" + item + "' needs at least one convolution and no negative pools");
    }
    out.push_back(t);
  }
  return out;
}

}  // namespace mrs
