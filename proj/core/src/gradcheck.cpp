// SPDX-License-Identifier: Apache-2.0
#include "distilkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distilkit/error.hpp"
#include "distilkit/rng.hpp"

namespace distilkit {

namespace {

double evaluate(const MultiScalarFn& fn, std::span<const Tensor> points) {
  Tape tape;
  std::vector<Var> inputs;
  inputs.reserve(points.size());
  for (const Tensor& p : points) inputs.push_back(tape.leaf(p, false));
  return fn(tape, inputs).value().item();
}

}  // namespace

GradCheckReport check_gradients(const ScalarFn& fn, const Tensor& point, double tolerance,
                                const GradCheckOptions& options) {
  MultiScalarFn wrapped = [&fn](Tape& tape, std::span<const Var> inputs) { return fn(tape, inputs[0]); };
  return check_gradients(wrapped, std::span<const Tensor>(&point, 1), tolerance, options);
}

GradCheckReport check_gradients(const MultiScalarFn& fn, std::span<const Tensor> points, double tolerance,
                                const GradCheckOptions& options) {
  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> inputs;
    for (const Tensor& p : points) inputs.push_back(tape.leaf(p, true));
    Var loss = fn(tape, inputs);
    tape.backward(loss);
    for (Var v : inputs) analytic.push_back(tape.grad(v));
  }

  GradCheckReport report;
  std::vector<Tensor> work(points.begin(), points.end());
  SeededRng rng(options.seed);
  for (std::size_t k = 0; k < work.size(); ++k) {
    const std::size_t n = work[k].numel();
    std::vector<std::size_t> coords;
    if (options.max_coordinates == 0 || options.max_coordinates >= n) {
      coords.resize(n);
      std::iota(coords.begin(), coords.end(), std::size_t{0});
    } else {
      coords = rng.sample_without_replacement(n, options.max_coordinates);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double original = work[k][i];
      work[k][i] = original + options.step;
      const double up = evaluate(fn, work);
      work[k][i] = original - options.step;
      const double down = evaluate(fn, work);
      work[k][i] = original;

      CoordinateCheck c;
      c.input = k;
      c.index = i;
      c.analytic = analytic[k][i];
      c.numeric = (up - down) / (2.0 * options.step);
      const double denom = std::max({std::abs(c.analytic), std::abs(c.numeric), options.floor});
      c.relative_error = std::abs(c.analytic - c.numeric) / denom;
      c.passed = c.relative_error < tolerance;
      report.max_relative_error = std::max(report.max_relative_error, c.relative_error);
      report.passed = report.passed && c.passed;
      report.coordinates.push_back(c);
    }
  }
  return report;
}

}  // namespace distilkit
