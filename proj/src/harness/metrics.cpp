#include "sargmax/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sargmax::harness {

std::optional<double> pearson(std::span<const double> xs,
                              std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
  if (xs.size() < 2) throw std::invalid_argument("pearson: need at least two values");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> calibration_report(const std::vector<TrialRecord>& records) {
  if (records.size() < 2) {
    throw std::invalid_argument("calibration_report: need at least two records");
  }
  std::vector<double> peaks, correctness;
  peaks.reserve(records.size());
  correctness.reserve(records.size());
  for (const TrialRecord& r : records) {
    peaks.push_back(r.peak);
    correctness.push_back(-r.error);
  }
  return pearson(peaks, correctness);
}

}  // namespace sargmax::harness
