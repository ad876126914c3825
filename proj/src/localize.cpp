#include "sargmax/localize.hpp"

#include <cmath>
#include <stdexcept>

namespace sargmax {

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kErrorOfExpectation: return "error-of-expectation";
    case LossKind::kDiscreteExpectedError: return "discrete-expected-error";
    case LossKind::kSampledExpectedError: return "sampled-expected-error";
    case LossKind::kVarianceRegularizer: return "variance-regularizer";
    case LossKind::kJsRegularizer: return "js-regularizer";
  }
  return "unknown";
}

void SamplingConfig::validate() const {
  if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
  if (!(tau_start > 0.0) || !(tau_end > 0.0)) {
    throw std::invalid_argument("temperatures must be positive");
  }
  if (tau_end > tau_start) {
    throw std::invalid_argument("tau_end must not exceed tau_start");
  }
}

Tensor soft_argmax(const ProbabilityMap& map) {
  return matmul(map.weights(), Tensor::matrix(map.support().positions()));
}

Tensor distance(const Tensor& prediction, const Point& target, Distance kind) {
  if (prediction.shape() != Shape{static_cast<std::size_t>(target.size())}) {
    throw ShapeError("distance: prediction " + to_string(prediction.shape()) +
                     " vs target of dimension " + std::to_string(target.size()));
  }
  const Tensor diff = prediction - Tensor::vector(target);
  return kind == Distance::kL1 ? sum(abs(diff)) : sum(square(diff));
}

double distance(const Point& a, const Point& b, Distance kind) {
  const Eigen::VectorXd diff = a - b;
  return kind == Distance::kL1 ? diff.cwiseAbs().sum() : diff.squaredNorm();
}

Tensor error_of_expectation_loss(const ProbabilityMap& map, const Point& target,
                                 Distance kind) {
  return distance(soft_argmax(map), target, kind);
}

Tensor discrete_expected_error_loss(const ProbabilityMap& map,
                                    const Point& target, Distance kind) {
  const Support& support = map.support();
  Eigen::VectorXd errors(static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) {
    errors[static_cast<Eigen::Index>(i)] =
        distance(target, support.position(i), kind);
  }
  return matmul(map.weights(), Tensor::vector(errors));
}

Tensor floored_log(const Tensor& x) {
  const Array lift = (1e-12 - x.values()).max(0.0);
  if ((lift == 0.0).all()) return log(x);
  return log(x + Tensor(x.shape(), lift));
}

Tensor gumbel_softmax(const ProbabilityMap& map, const NoiseDraw& noise,
                      double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("gumbel_softmax: tau must be > 0");
  if (static_cast<std::size_t>(noise.gumbels.size()) != map.size()) {
    throw std::invalid_argument("gumbel_softmax: noise size mismatch");
  }
  const Tensor scores = floored_log(map.weights()) + Tensor::vector(noise.gumbels);
  return softmax(scores / tau, 0);
}

Eigen::MatrixXd kernel_draws(const ProbabilityMap& map, const MixtureSpec& spec,
                             const NoiseDraw& noise) {
  const Support& support = map.support();
  spec.validate(support);
  if (static_cast<std::size_t>(noise.basis_uniforms.rows()) != support.size() ||
      static_cast<std::size_t>(noise.basis_uniforms.cols()) != support.dims()) {
    throw std::invalid_argument("kernel_draws: noise shape mismatch");
  }
  const double scale = spec.scale(support);
  Eigen::MatrixXd draws = support.positions();
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    for (Eigen::Index d = 0; d < draws.cols(); ++d) {
      draws(i, d) += basis_quantile_1d(spec.basis, noise.basis_uniforms(i, d), scale);
    }
  }
  return draws;
}

Tensor sample_differentiable(const ProbabilityMap& map, const MixtureSpec& spec,
                             const NoiseDraw& noise, double tau) {
  const Tensor relaxed = gumbel_softmax(map, noise, tau);
  return matmul(relaxed, Tensor::matrix(kernel_draws(map, spec, noise)));
}

Tensor sampled_expected_error_loss(const ProbabilityMap& map,
                                   const MixtureSpec& spec, const Point& target,
                                   const SamplingConfig& cfg, double tau,
                                   NoiseStream& noise) {
  cfg.validate();
  const std::size_t n = map.size();
  const std::size_t dims = map.support().dims();
  Tensor total;
  for (std::size_t k = 0; k < cfg.num_samples; ++k) {
    const NoiseDraw draw = noise.next(n, dims);
    const Tensor err =
        distance(sample_differentiable(map, spec, draw, tau), target, cfg.distance);
    total = k == 0 ? err : total + err;
  }
  return total / static_cast<double>(cfg.num_samples);
}

double anneal_tau(const SamplingConfig& cfg, std::size_t step,
                  std::size_t total) {
  if (total == 0) throw std::invalid_argument("anneal_tau: total must be > 0");
  if (step > total) throw std::invalid_argument("anneal_tau: step > total");
  if (step == 0) return cfg.tau_start;
  if (step == total) return cfg.tau_end;
  const double t = static_cast<double>(step) / static_cast<double>(total);
  if (cfg.anneal == Anneal::kExponential) {
    return cfg.tau_start * std::pow(cfg.tau_end / cfg.tau_start, t);
  }
  return cfg.tau_start + (cfg.tau_end - cfg.tau_start) * t;
}

Tensor discrete_variance(const ProbabilityMap& map) {
  const Tensor centered =
      Tensor::matrix(map.support().positions()) - soft_argmax(map);
  return matmul(map.weights(), square(centered));
}

Tensor variance_regularizer(const ProbabilityMap& map, double sigma_t_sq) {
  if (!(sigma_t_sq > 0.0)) {
    throw std::invalid_argument("variance_regularizer: sigma_t_sq must be > 0");
  }
  return square(sum(discrete_variance(map)) - sigma_t_sq);
}

Array discrete_gaussian_target(const Support& support, const Point& center,
                               double sigma_t_sq) {
  if (!(sigma_t_sq > 0.0)) {
    throw std::invalid_argument("discrete_gaussian_target: variance must be > 0");
  }
  const auto& pos = support.positions();
  const double sigma = std::sqrt(sigma_t_sq);
  Array q(pos.rows());
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    double density = 1.0;
    for (Eigen::Index d = 0; d < pos.cols(); ++d) {
      density *= basis_pdf_1d(Basis::kGaussian, pos(i, d) - center[d], sigma);
    }
    q[i] = density;
  }
  const double total = q.sum();
  if (!(total > 0.0)) {
    throw NumericError("discrete_gaussian_target: target underflows on support");
  }
  return q / total;
}

Tensor js_divergence(const Tensor& p, const Tensor& q) {
  const Tensor mid = (p + q) * 0.5;
  const Tensor log_mid = floored_log(mid);
  const Tensor kl_p = sum(p * (floored_log(p) - log_mid));
  const Tensor kl_q = sum(q * (floored_log(q) - log_mid));
  return (kl_p + kl_q) * 0.5;
}

Tensor js_regularizer(const ProbabilityMap& map, double sigma_t_sq,
                      const std::optional<Point>& center) {
  Point c;
  if (center) {
    c = *center;
  } else {
    NoGradScope detached;
    c = soft_argmax(map).values().matrix();
  }
  const Array target = discrete_gaussian_target(map.support(), c, sigma_t_sq);
  return js_divergence(map.weights(), Tensor({map.size()}, target));
}

Point inference_localize(const ProbabilityMap& map) {
  NoGradScope no_grad;
  return soft_argmax(map).values().matrix();
}

}  // namespace sargmax
