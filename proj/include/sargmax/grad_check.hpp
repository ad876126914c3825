#pragma once

#include "sargmax/autodiff.hpp"

#include <functional>
#include <stdexcept>

namespace sargmax {

// Raised when two forward evaluations at the same input disagree.
class NondeterministicFunction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckReport {
  Array analytic;
  Array numeric;
  Array relative_error;
  double max_relative_error = 0.0;
  bool passed = false;
};

using ScalarFunction = std::function<Tensor(const Tensor&)>;

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// Compares the tape gradient of `f` at `x` with central finite differences of
// step `step`. Passes iff the largest relative error is below `tol`.
GradCheckReport grad_check(const ScalarFunction& f, const Tensor& x,
                           double step = 1e-5, double tol = 1e-4);

}  // namespace sargmax
