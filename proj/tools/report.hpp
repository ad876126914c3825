#pragma once

// CSV, text-table and model-file writers for the command-line tool.

#include "sargmax/harness/suites.hpp"
#include "sargmax/harness/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sargmax::cli {

// Shortest decimal that round-trips.
std::string num(double value);
std::string num(const std::optional<double>& value);  // "NA" when empty

std::string history_csv(const std::vector<harness::EpochRecord>& history);
std::string evaluation_csv(const harness::Evaluation& eval);
std::string gradcheck_csv(const harness::GradcheckReport& report);
std::string distcheck_csv(const harness::DistcheckReport& report);
std::string variance_csv(const harness::VarianceReport& report);

std::string gradcheck_table(const harness::GradcheckReport& report);
std::string distcheck_table(const harness::DistcheckReport& report);
std::string variance_table(const harness::VarianceReport& report);

struct CalibrationRow {
  std::uint64_t seed = 0;
  std::string loss;
  harness::EvalSummary summary;
  std::optional<double> pearson_r;
};

std::string calibration_csv(const std::vector<CalibrationRow>& rows);
std::string calibration_table(const std::vector<CalibrationRow>& rows);

// Writes to a sibling temporary file and renames it into place.
void write_file(const std::string& path, const std::string& content);

std::string model_json(const harness::Mlp& model);
harness::Mlp model_from_json(const std::string& text);

}  // namespace sargmax::cli
