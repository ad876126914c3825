#pragma once

// Continuous mixture densities built from a discrete probability map:
// p(y) = sum_i w_i f_i(y), with f_i a uniform, triangular or Gaussian kernel
// centred at support point y_i. Multi-dimensional kernels are separable
// products of the 1-D kernel; the categorical is over the flattened support.

#include "sargmax/autodiff.hpp"
#include "sargmax/basis.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace sargmax {

using Point = Eigen::VectorXd;

enum class SupportKind { kGrid, kScattered };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

class Support {
 public:
  // Regular grid with origin 0, flattened row-major (last axis fastest).
  static Support grid(std::vector<std::size_t> extents, double spacing = 1.0);
  // Arbitrary points, one per row; every coordinate must lie within bounds.
  static Support scattered(Eigen::MatrixXd positions,
                           std::vector<Interval> bounds);

  SupportKind kind() const { return kind_; }
  std::size_t size() const { return static_cast<std::size_t>(positions_.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(positions_.cols()); }
  // n x D
  const Eigen::MatrixXd& positions() const { return positions_; }
  Point position(std::size_t i) const { return positions_.row(static_cast<Eigen::Index>(i)).transpose(); }
  // Grid spacing c; throws for scattered supports.
  double spacing() const;
  const std::vector<std::size_t>& extents() const { return extents_; }
  const std::vector<Interval>& bounds() const { return bounds_; }

 private:
  SupportKind kind_ = SupportKind::kGrid;
  Eigen::MatrixXd positions_;
  double spacing_ = 0.0;
  std::vector<std::size_t> extents_;
  std::vector<Interval> bounds_;
};

using SupportPtr = std::shared_ptr<const Support>;

class InvalidMap : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Normalised weights over a support. The weights tensor may carry gradient
// history.
class ProbabilityMap {
 public:
  ProbabilityMap(SupportPtr support, Tensor weights);

  // softmax(logits) over a length-n vector of logits.
  static ProbabilityMap from_logits(SupportPtr support, const Tensor& logits);

  const Support& support() const { return *support_; }
  const SupportPtr& support_ptr() const { return support_; }
  const Tensor& weights() const { return weights_; }
  const Array& weight_values() const { return weights_.values(); }
  std::size_t size() const { return support_->size(); }

 private:
  SupportPtr support_;
  Tensor weights_;
};

struct MixtureSpec {
  Basis basis = Basis::kTriangular;
  // Gaussian only; defaults to the grid spacing. Required on scattered
  // supports.
  std::optional<double> sigma;

  // Kernel scale on `support`: c for uniform/triangular, sigma for Gaussian.
  double scale(const Support& support) const;
  // Throws std::invalid_argument when the spec cannot be used on `support`.
  void validate(const Support& support) const;
};

// One realisation of the sampling noise for an n-component mixture.
struct NoiseDraw {
  Eigen::VectorXd gumbels;          // n
  Eigen::MatrixXd basis_uniforms;   // n x D, open (0,1)
};

// Counter-based noise source: draw k is a pure function of (seed, k).
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t seed, std::uint64_t first_index = 0)
      : seed_(seed), next_(first_index) {}

  NoiseDraw next(std::size_t n, std::size_t dims);
  std::uint64_t seed() const { return seed_; }
  std::uint64_t position() const { return next_; }

 private:
  std::uint64_t seed_;
  std::uint64_t next_;
};

NoiseDraw draw_noise(std::uint64_t seed, std::uint64_t draw_index,
                     std::size_t n, std::size_t dims);
inline NoiseDraw draw_noise(NoiseStream& stream, std::size_t n,
                            std::size_t dims = 1) {
  return stream.next(n, dims);
}

double basis_pdf(const MixtureSpec& spec, const Support& support,
                 std::size_t i, const Point& y);
double mixture_pdf(const ProbabilityMap& map, const MixtureSpec& spec,
                   const Point& y);
double mixture_pdf(const ProbabilityMap& map, const MixtureSpec& spec,
                   double y);

struct Moments {
  Point mean;
  Eigen::VectorXd variance;  // per axis
};

Moments mixture_moments(const ProbabilityMap& map, const MixtureSpec& spec);

// 1-D supports only.
double mixture_cdf(const ProbabilityMap& map, const MixtureSpec& spec,
                   double y);

// Inverse-CDF draw from kernel i, one uniform per axis.
Point basis_sample(const MixtureSpec& spec, const Support& support,
                   std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& u);

// argmax_i (g_i + log max(w_i, 1e-12)).
std::size_t gumbel_argmax(const Array& weights, const Eigen::VectorXd& gumbels);

// Exact, non-differentiable mixture sample (Gumbel-Max then kernel draw).
Point reference_sample(const ProbabilityMap& map, const MixtureSpec& spec,
                       const NoiseDraw& noise);

// Two-sided Kolmogorov-Smirnov distance between the empirical CDF of
// `samples` and `cdf`.
double ks_statistic(std::span<const double> samples,
                    const std::function<double(double)>& cdf);

// Asymptotic two-sided critical value sqrt(-ln(alpha/2)/2) / sqrt(n).
double ks_critical_value(std::size_t n, double alpha);

}  // namespace sargmax
