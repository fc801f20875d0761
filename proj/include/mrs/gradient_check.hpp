#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "mrs/errors.hpp"
#include "mrs/ops.hpp"
#include "mrs/random.hpp"
#include "mrs/tensor.hpp"

namespace mrs {

// Anything with a cached forward, a backward that returns d_input and fills
// its parameter gradients, and access to both. Layer<double> and
// Model<double> qualify.
template <typename T>
concept Differentiable = requires(T& net, const Tensord& x, ops::Mode mode, std::uint64_t seed) {
  { net.forward(x, mode, seed) } -> std::same_as<Tensord>;
  { net.backward(x) } -> std::same_as<Tensord>;
  { net.parameters() } -> std::same_as<std::vector<Tensord*>>;
  { net.gradients() } -> std::same_as<std::vector<const Tensord*>>;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  Index coordinates_checked = 0;
  std::string worst;  // "input[i]" or "param<k>[i]"
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradientCheckOptions {
  double step = 1e-5;
  std::uint64_t seed = 0;  // projection weights and dropout mask
  ops::Mode mode = ops::Mode::Train;
  double denominator_floor = 1e-8;
};

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares analytic gradients of L = sum(R * net(x)) against central finite
// differences, for every input coordinate and every parameter coordinate. R
// is a fixed random projection drawn from options.seed.
template <Differentiable Net>
GradientCheckReport gradient_check(Net& net, const Tensord& input, double tolerance,
                                   const GradientCheckOptions& options = {}) {
  if (!input.all_finite()) throw NumericalError("gradient_check: input contains non-finite values");

  Tensord probe;
  auto objective = [&](const Tensord& x) {
    const Tensord y = net.forward(x, options.mode, options.seed);
    if (!y.all_finite()) throw NumericalError("gradient_check: forward produced non-finite values");
    if (probe.empty()) {
      probe = Tensord(y.shape());
      Rng rng(mix_seed(options.seed, 0x9c));
      for (Index i = 0; i < probe.size(); ++i) probe[i] = rng.uniform(-1.0, 1.0);
    }
    return (y.values() * probe.values()).sum();
  };

  objective(input);
  const Tensord d_input = net.backward(probe);
  std::vector<Tensord> d_params;
  for (const Tensord* g : net.gradients()) d_params.push_back(*g);
  if (!d_input.all_finite()) throw NumericalError("gradient_check: backward produced non-finite values");

  GradientCheckReport report;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    if (!std::isfinite(numeric)) throw NumericalError("gradient_check: non-finite difference at " + where);
    const double err = relative_error(analytic, numeric, options.denominator_floor);
    ++report.coordinates_checked;
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst = where;
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  };

  Tensord x = input;
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + options.step;
    const double plus = objective(x);
    x[i] = saved - options.step;
    const double minus = objective(x);
    x[i] = saved;
    record(d_input[i], (plus - minus) / (2 * options.step), "input[" + std::to_string(i) + "]");
  }

  std::vector<Tensord*> params = net.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensord& w = *params[p];
    for (Index i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + options.step;
      const double plus = objective(input);
      w[i] = saved - options.step;
      const double minus = objective(input);
      w[i] = saved;
      record(d_params[p][i], (plus - minus) / (2 * options.step),
             "param" + std::to_string(p) + "[" + std::to_string(i) + "]");
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace mrs
