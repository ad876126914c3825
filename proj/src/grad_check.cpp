#include "sargmax/grad_check.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

namespace sargmax {

double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

GradCheckReport grad_check(const ScalarFunction& f, const Tensor& x,
                           double step, double tol) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");

  auto evaluate = [&](const Array& values) {
    NoGradScope no_grad;
    const Tensor out = f(Tensor(x.shape(), values));
    return out.item();
  };

  const double first = evaluate(x.values());
  const double second = evaluate(x.values());
  if (std::bit_cast<std::uint64_t>(first) != std::bit_cast<std::uint64_t>(second)) {
    throw NondeterministicFunction(
        "grad_check: repeated evaluation gave different values");
  }

  GradCheckReport report;
  {
    GradientTape tape;
    RecordingScope scope(tape);
    Tensor input = Tensor(x.shape(), x.values());
    input.requires_grad(true);
    const Tensor out = f(input);
    if (out.size() != 1) {
      throw ShapeError("grad_check: function must return a scalar");
    }
    if (out.requires_grad()) backward(out);
    report.analytic = input.grad() ? *input.grad() : Array::Zero(x.values().size());
  }

  const auto n = x.values().size();
  report.numeric.resize(n);
  report.relative_error.resize(n);
  Array probe = x.values();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = evaluate(probe);
    probe[i] = original - step;
    const double down = evaluate(probe);
    probe[i] = original;
    report.numeric[i] = (up - down) / (2.0 * step);
    report.relative_error[i] = relative_error(report.analytic[i], report.numeric[i]);
  }
  report.max_relative_error = n > 0 ? report.relative_error.maxCoeff() : 0.0;
  report.passed = report.max_relative_error < tol;
  return report;
}

}  // namespace sargmax
