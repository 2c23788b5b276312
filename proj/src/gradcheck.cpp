#include "camlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "camlab/errors.hpp"

namespace camlab {

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / denom;
}

namespace {

struct Eval {
  double value;
  std::uint64_t signature;
};

Eval evaluate(const ScalarFn& fn, const Tensor& point) {
  Tape tape;
  Var x = tape.variable(point);
  Var y = fn(tape, x);
  return {tape.value(y).item(), tape.branch_signature()};
}

}  // namespace

FdCheckResult finite_diff_check(const ScalarFn& fn, const Tensor& point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");

  FdCheckResult r;
  Tape tape;
  Var x = tape.variable(point);
  Var y = fn(tape, x);
  auto grads = tape.backward(y);
  r.analytic = grads.has(x) ? grads.of(x) : Tensor(point.shape());
  r.numeric = Tensor(point.shape());
  const auto base_sig = tape.branch_signature();

  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const auto up = evaluate(fn, probe);
    probe[i] = point[i] - step;
    const auto down = evaluate(fn, probe);
    probe[i] = point[i];
    r.numeric[i] = (up.value - down.value) / (2.0 * step);
    if (up.signature != base_sig || down.signature != base_sig) {
      r.skipped.push_back(i);
      continue;
    }
    ++r.checked;
    const double err = relative_error(r.analytic[i], r.numeric[i]);
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

}  // namespace camlab
