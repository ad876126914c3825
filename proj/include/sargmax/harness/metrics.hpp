#pragma once

#include "sargmax/harness/training.hpp"

#include <optional>
#include <span>
#include <vector>

namespace sargmax::harness {

// Pearson correlation; nullopt when either list has zero variance. Throws
// std::invalid_argument for unequal lengths or fewer than two values.
std::optional<double> pearson(std::span<const double> xs,
                              std::span<const double> ys);

// pearson(peak probabilities, -errors): positive when confident maps are the
// accurate ones.
std::optional<double> calibration_report(const std::vector<TrialRecord>& records);

}  // namespace sargmax::harness
