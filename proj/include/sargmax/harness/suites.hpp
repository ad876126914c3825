#pragma once

// Diagnostic suites behind the gradcheck, distcheck and varcompare commands.
// Failures are report rows, never exceptions.

#include "sargmax/grad_check.hpp"
#include "sargmax/localize.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace sargmax::harness {

// Logits uniform in [-2, 2] and targets uniform within the support bounds,
// both pure functions of the seed.
Eigen::VectorXd random_logits(std::uint64_t seed, std::size_t n);
Point random_target(std::uint64_t seed, const Support& support);

// ---------------------------------------------------------------- gradcheck

// A differentiable loss as a function of the logits, built once per
// (support, spec, seed). Stochastic losses must freeze their noise.
struct LossCase {
  std::string name;
  std::function<ScalarFunction(const SupportPtr&, const MixtureSpec&,
                               const Eigen::VectorXd& logits, std::uint64_t seed)>
      make;
};

// soft, discrete, samp (N_s = 2), variance, js.
std::vector<LossCase> default_loss_cases(double tau = 1.0);

struct GradcheckOptions {
  std::vector<LossCase> cases = default_loss_cases();
  std::vector<Basis> bases{Basis::kUniform, Basis::kTriangular, Basis::kGaussian};
  std::vector<std::size_t> dims{1, 2};
  std::size_t seeds = 20;
  double step = 1e-5;
  double tol = 1e-4;
};

struct GradcheckRow {
  std::string loss;
  Basis basis = Basis::kTriangular;
  std::size_t dims = 1;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  bool all_passed() const;
};

// Supports: 8-point line for D = 1, 4 x 4 grid for D = 2.
GradcheckReport gradcheck_suite(const GradcheckOptions& options = {});

// ---------------------------------------------------------------- distcheck

struct DistcheckOptions {
  std::size_t maps = 20;          // reference-sampler maps
  std::size_t relaxed_maps = 5;   // relaxed-sampler maps
  std::size_t draws = 100000;
  std::size_t bins = 16;
  double alpha = 0.01;
  double freq_tol = 0.01;
  std::vector<double> taus{0.05, 1.0};
  std::uint64_t seed = 0;
};

// check is one of
//   reference-ks    KS of exact samples vs the mixture CDF (hard)
//   relaxed-freq    max |argmax frequency - pi| of Gumbel-softmax (hard)
//   relaxed-ks      KS of relaxed samples vs the mixture CDF (reported)
//   relaxed-ks-order  KS at the smallest tau below KS at the largest (hard)
//   moments         |sample mean - mixture mean| in standard errors (reported)
//   one-hot         every sample from the forced component's support (hard)
struct DistcheckRow {
  std::string check;
  Basis basis = Basis::kTriangular;
  std::uint64_t map_seed = 0;
  double tau = 0.0;         // 0 where no relaxation is involved
  double statistic = 0.0;
  double threshold = 0.0;
  bool hard = true;
  bool passed = false;
};

struct DistcheckReport {
  std::vector<DistcheckRow> rows;
  bool hard_passed() const;
};

DistcheckReport distcheck_suite(const DistcheckOptions& options = {});

// -------------------------------------------------------------- varcompare

struct VarianceOptions {
  std::size_t seeds = 10;
  std::size_t draws = 10000;
  std::size_t bins = 16;
  double tau = 1.0;
  Basis basis = Basis::kTriangular;
  // Shifts the noise streams without changing the maps.
  std::uint64_t noise_offset = 0;
};

struct VarianceRow {
  std::uint64_t seed = 0;
  double trace_sf = 0.0;         // score-function estimator
  double trace_rp = 0.0;         // reparameterized estimator
  double ratio = 0.0;            // trace_sf / trace_rp
  double coord_fraction = 0.0;   // coordinates where the SF variance is larger
  bool passed = false;           // ratio > 1
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
  bool all_passed() const;
};

// Per-coordinate variance, over `draws` single-sample estimates, of the
// gradient of E|Y - y_t| with respect to the logits of a fixed map.
VarianceReport variance_compare(const VarianceOptions& options = {});

}  // namespace sargmax::harness
