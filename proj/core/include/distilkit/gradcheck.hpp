// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "distilkit/tape.hpp"

namespace distilkit {

struct GradCheckOptions {
  double step = 1e-5;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Check at most this many coordinates per input (0 = all), sampled by seed.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

struct CoordinateCheck {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<CoordinateCheck> coordinates;
  double max_relative_error = 0.0;
  bool passed = true;
};

using ScalarFn = std::function<Var(Tape&, Var)>;
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares backward() against central differences at `point`.
GradCheckReport check_gradients(const ScalarFn& fn, const Tensor& point, double tolerance,
                                const GradCheckOptions& options = {});

/// Same, for a function of several tensors; every input gets a gradient.
GradCheckReport check_gradients(const MultiScalarFn& fn, std::span<const Tensor> points,
                                double tolerance, const GradCheckOptions& options = {});

}  // namespace distilkit
