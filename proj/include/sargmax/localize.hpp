#pragma once

// Differentiable localisation operators and their losses.
//
//   soft_argmax            sum_i pi_i y_i
//   error-of-expectation   d(y_t, soft_argmax(pi))
//   discrete expected err  sum_i pi_i d(y_t, y_i)
//   sampled expected err   mean_k d(y_t, Y_k), Y_k a Gumbel-softmax weighted
//                          combination of per-kernel draws
//   variance regularizer   (Var(pi) - sigma_t^2)^2
//   JS regularizer         D_JS(pi || discrete N(E[y], sigma_t^2))

#include "sargmax/autodiff.hpp"
#include "sargmax/mixture.hpp"

#include <cstddef>
#include <optional>
#include <string>

namespace sargmax {

enum class Distance { kL1, kL2Squared };
enum class Anneal { kExponential, kLinear };

enum class LossKind {
  kErrorOfExpectation,
  kDiscreteExpectedError,
  kSampledExpectedError,
  kVarianceRegularizer,
  kJsRegularizer,
};

const char* loss_kind_name(LossKind kind);

struct SamplingConfig {
  std::size_t num_samples = 1;
  double tau_start = 1.0;
  double tau_end = 0.1;
  Anneal anneal = Anneal::kExponential;
  Distance distance = Distance::kL1;

  void validate() const;
};

// Probability-weighted mean of the support positions; shape [D].
Tensor soft_argmax(const ProbabilityMap& map);

// d(target, prediction) for a [D] prediction; rank-0 result.
Tensor distance(const Tensor& prediction, const Point& target, Distance kind);
double distance(const Point& a, const Point& b, Distance kind);

Tensor error_of_expectation_loss(const ProbabilityMap& map, const Point& target,
                                 Distance kind = Distance::kL1);

Tensor discrete_expected_error_loss(const ProbabilityMap& map,
                                    const Point& target,
                                    Distance kind = Distance::kL1);

// log(max(x, 1e-12)), differentiable wherever x >= 1e-12.
Tensor floored_log(const Tensor& x);

// Relaxed one-hot over the n components; throws for tau <= 0.
Tensor gumbel_softmax(const ProbabilityMap& map, const NoiseDraw& noise,
                      double tau);

// Per-kernel draws y_i + F^-1(u_i), n x D. Constant with respect to the map.
Eigen::MatrixXd kernel_draws(const ProbabilityMap& map, const MixtureSpec& spec,
                             const NoiseDraw& noise);

// sum_i relaxed_i * kernel_draw_i; shape [D].
Tensor sample_differentiable(const ProbabilityMap& map, const MixtureSpec& spec,
                             const NoiseDraw& noise, double tau);

Tensor sampled_expected_error_loss(const ProbabilityMap& map,
                                   const MixtureSpec& spec, const Point& target,
                                   const SamplingConfig& cfg, double tau,
                                   NoiseStream& noise);

double anneal_tau(const SamplingConfig& cfg, std::size_t step,
                  std::size_t total);

// Per-axis discrete variance sum_i pi_i (y_i - E[y])^2; shape [D].
Tensor discrete_variance(const ProbabilityMap& map);

Tensor variance_regularizer(const ProbabilityMap& map, double sigma_t_sq);

// Separable Gaussian with variance sigma_t_sq evaluated at the support points,
// renormalised to sum to one.
Array discrete_gaussian_target(const Support& support, const Point& center,
                               double sigma_t_sq);

// Jensen-Shannon divergence in nats with 1e-12 floors inside the logs.
Tensor js_divergence(const Tensor& p, const Tensor& q);

// The target centre defaults to the map's current expectation and is never
// differentiated through.
Tensor js_regularizer(const ProbabilityMap& map, double sigma_t_sq,
                      const std::optional<Point>& center = std::nullopt);

// Test-time localisation: exactly the soft-argmax, no noise.
Point inference_localize(const ProbabilityMap& map);

}  // namespace sargmax
