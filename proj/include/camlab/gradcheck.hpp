#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "camlab/tape.hpp"

namespace camlab {

/// Builds a scalar target on `tape` from the leaf `input`.
using ScalarFn = std::function<Var(Tape& tape, Var input)>;

struct FdCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  /// Coordinates whose +/- step straddles a ReLU or argmax switch.
  std::vector<std::size_t> skipped;
  Tensor analytic;
  Tensor numeric;
};

/// max(|a|, |b|, 1e-12)-relative error of a against b.
double relative_error(double a, double b);

/// Compares reverse-mode gradients with central differences at `point`.
FdCheckResult finite_diff_check(const ScalarFn& fn, const Tensor& point, double step);

}  // namespace camlab
