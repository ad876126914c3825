#include "report.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>

namespace sargmax::cli {
namespace {

const char* kAxes[] = {"x", "y", "z"};

std::string axis_name(std::size_t k) {
  return k < 3 ? kAxes[k] : fmt::format("d{}", k);
}

nlohmann::json tensor_json(const Tensor& t) {
  return {{"shape", t.shape()},
          {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from(const nlohmann::json& j) {
  const Shape shape = j.at("shape").get<Shape>();
  const std::vector<double> values = j.at("values").get<std::vector<double>>();
  if (values.size() != shape_size(shape)) {
    throw std::invalid_argument("model file: value count does not match shape");
  }
  return Tensor(shape, Eigen::Map<const Array>(values.data(), static_cast<Eigen::Index>(values.size())));
}

}  // namespace

std::string num(double value) { return fmt::format("{}", value); }

std::string num(const std::optional<double>& value) {
  return value ? num(*value) : std::string("NA");
}

std::string history_csv(const std::vector<harness::EpochRecord>& history) {
  std::string out = "epoch,loss,val_mean_err,tau\n";
  for (const auto& h : history) {
    out += fmt::format("{},{},{},{}\n", h.epoch, num(h.loss), num(h.val_mean_err), num(h.tau));
  }
  return out;
}

std::string evaluation_csv(const harness::Evaluation& eval) {
  const std::size_t dims =
      eval.records.empty() ? 1 : static_cast<std::size_t>(eval.records.front().target.size());
  std::string out = "idx";
  for (std::size_t k = 0; k < dims; ++k) out += ",pred_" + axis_name(k);
  for (std::size_t k = 0; k < dims; ++k) out += ",gt_" + axis_name(k);
  out += ",peak,err\n";
  for (std::size_t i = 0; i < eval.records.size(); ++i) {
    const auto& r = eval.records[i];
    out += fmt::format("{}", i);
    for (Eigen::Index k = 0; k < r.prediction.size(); ++k) out += "," + num(r.prediction[k]);
    for (Eigen::Index k = 0; k < r.target.size(); ++k) out += "," + num(r.target[k]);
    out += fmt::format(",{},{}\n", num(r.peak), num(r.error));
  }
  return out;
}

std::string gradcheck_csv(const harness::GradcheckReport& report) {
  std::string out = "loss,basis,dims,seed,max_rel_err,passed\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.loss, basis_name(r.basis), r.dims, r.seed,
                       num(r.max_relative_error), r.passed ? 1 : 0);
  }
  return out;
}

std::string distcheck_csv(const harness::DistcheckReport& report) {
  std::string out = "check,basis,map_seed,tau,statistic,threshold,hard,passed\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.check, basis_name(r.basis), r.map_seed,
                       num(r.tau), num(r.statistic), num(r.threshold), r.hard ? 1 : 0,
                       r.passed ? 1 : 0);
  }
  return out;
}

std::string variance_csv(const harness::VarianceReport& report) {
  std::string out = "seed,trace_sf,trace_rp,ratio,coord_fraction,passed\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.seed, num(r.trace_sf), num(r.trace_rp),
                       num(r.ratio), num(r.coord_fraction), r.passed ? 1 : 0);
  }
  return out;
}

std::string gradcheck_table(const harness::GradcheckReport& report) {
  struct Group {
    std::size_t rows = 0, failed = 0;
    double worst = 0.0;
  };
  std::map<std::tuple<std::string, std::string, std::size_t>, Group> groups;
  std::vector<std::tuple<std::string, std::string, std::size_t>> order;
  for (const auto& r : report.rows) {
    const auto key = std::make_tuple(r.loss, std::string(basis_name(r.basis)), r.dims);
    if (!groups.count(key)) order.push_back(key);
    Group& g = groups[key];
    ++g.rows;
    g.failed += r.passed ? 0 : 1;
    g.worst = std::max(g.worst, r.max_relative_error);
  }
  std::string out = fmt::format("{:<10} {:<11} {:>4} {:>5} {:>6} {:>12}\n", "loss", "basis",
                                "dims", "rows", "failed", "worst_rel");
  for (const auto& key : order) {
    const Group& g = groups[key];
    out += fmt::format("{:<10} {:<11} {:>4} {:>5} {:>6} {:>12.3e}\n", std::get<0>(key),
                       std::get<1>(key), std::get<2>(key), g.rows, g.failed, g.worst);
  }
  const std::size_t failed = static_cast<std::size_t>(std::count_if(
      report.rows.begin(), report.rows.end(), [](const auto& r) { return !r.passed; }));
  out += fmt::format("{} rows, {} failed\n", report.rows.size(), failed);
  return out;
}

std::string distcheck_table(const harness::DistcheckReport& report) {
  std::string out = fmt::format("{:<17} {:<11} {:>4} {:>5} {:>11} {:>11} {:>4} {}\n", "check",
                                "basis", "map", "tau", "statistic", "threshold", "hard",
                                "result");
  for (const auto& r : report.rows) {
    out += fmt::format("{:<17} {:<11} {:>4} {:>5.2f} {:>11.5f} {:>11.5f} {:>4} {}\n", r.check,
                       basis_name(r.basis), r.map_seed, r.tau, r.statistic, r.threshold,
                       r.hard ? "yes" : "no", r.passed ? "pass" : "FAIL");
  }
  out += report.hard_passed() ? "all hard checks passed\n" : "hard check failures\n";
  return out;
}

std::string variance_table(const harness::VarianceReport& report) {
  std::string out = fmt::format("{:>4} {:>12} {:>12} {:>9} {:>7} {}\n", "seed", "trace_sf",
                                "trace_rp", "ratio", "coords", "result");
  for (const auto& r : report.rows) {
    out += fmt::format("{:>4} {:>12.5g} {:>12.5g} {:>9.3f} {:>7.3f} {}\n", r.seed, r.trace_sf,
                       r.trace_rp, r.ratio, r.coord_fraction, r.passed ? "pass" : "FAIL");
  }
  return out;
}

std::string calibration_csv(const std::vector<CalibrationRow>& rows) {
  std::string out = "seed,loss,mean_err,median_err,within_1,pearson_r\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.seed, r.loss, num(r.summary.mean_error),
                       num(r.summary.median_error), num(r.summary.within_one), num(r.pearson_r));
  }
  return out;
}

std::string calibration_table(const std::vector<CalibrationRow>& rows) {
  std::string out = fmt::format("{:>4} {:<9} {:>9} {:>9} {:>9} {:>9}\n", "seed", "loss",
                                "mean_err", "median", "within_1", "r");
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    out += fmt::format("{:>4} {:<9} {:>9.4f} {:>9.4f} {:>9.3f} {:>9}\n", r.seed, r.loss,
                       r.summary.mean_error, r.summary.median_error, r.summary.within_one,
                       r.pearson_r ? fmt::format("{:.4f}", *r.pearson_r) : "NA");
    if (!counts.count(r.loss)) order.push_back(r.loss);
    sums[r.loss].first += r.summary.mean_error;
    if (r.pearson_r) sums[r.loss].second += *r.pearson_r;
    ++counts[r.loss];
  }
  for (const auto& loss : order) {
    const double n = static_cast<double>(counts[loss]);
    out += fmt::format("mean {:<9} error {:.4f}  r {:.4f}\n", loss, sums[loss].first / n,
                       sums[loss].second / n);
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << content;
    if (!f.flush()) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

std::string model_json(const harness::Mlp& model) {
  const auto p = model.parameters();
  nlohmann::json j = {{"w1", tensor_json(p[0])},
                      {"b1", tensor_json(p[1])},
                      {"w2", tensor_json(p[2])},
                      {"b2", tensor_json(p[3])}};
  return j.dump(1) + "\n";
}

harness::Mlp model_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  return harness::Mlp(tensor_from(j.at("w1")), tensor_from(j.at("b1")),
                      tensor_from(j.at("w2")), tensor_from(j.at("b2")));
}

}  // namespace sargmax::cli
