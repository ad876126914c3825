#include "sargmax/mixture.hpp"

#include "sargmax/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace sargmax {

const char* basis_name(Basis basis) {
  switch (basis) {
    case Basis::kUniform: return "uniform";
    case Basis::kTriangular: return "triangular";
    case Basis::kGaussian: return "gaussian";
  }
  return "unknown";
}

Basis parse_basis(const char* name) {
  const std::string s(name);
  if (s == "uniform") return Basis::kUniform;
  if (s == "triangular") return Basis::kTriangular;
  if (s == "gaussian") return Basis::kGaussian;
  throw std::invalid_argument("unknown basis '" + s + "'");
}

// ---------------------------------------------------------------------------
// Support

Support Support::grid(std::vector<std::size_t> extents, double spacing) {
  if (extents.empty() || extents.size() > 3) {
    throw std::invalid_argument("grid support needs 1 to 3 axes");
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw std::invalid_argument("grid spacing must be positive");
  }
  std::size_t n = 1;
  for (auto e : extents) {
    if (e == 0) throw std::invalid_argument("grid axis of extent 0");
    n *= e;
  }
  const auto dims = extents.size();
  Support s;
  s.kind_ = SupportKind::kGrid;
  s.spacing_ = spacing;
  s.positions_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dims));
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t rest = flat;
    for (std::size_t d = dims; d-- > 0;) {
      s.positions_(static_cast<Eigen::Index>(flat), static_cast<Eigen::Index>(d)) =
          static_cast<double>(rest % extents[d]) * spacing;
      rest /= extents[d];
    }
  }
  for (auto e : extents) {
    s.bounds_.push_back({0.0, static_cast<double>(e - 1) * spacing});
  }
  s.extents_ = std::move(extents);
  return s;
}

Support Support::scattered(Eigen::MatrixXd positions,
                           std::vector<Interval> bounds) {
  if (positions.rows() == 0 || positions.cols() == 0 || positions.cols() > 3) {
    throw std::invalid_argument("scattered support needs points in 1 to 3 dims");
  }
  if (bounds.size() != static_cast<std::size_t>(positions.cols())) {
    throw std::invalid_argument("scattered support: one bound per axis");
  }
  if (!positions.allFinite()) {
    throw std::invalid_argument("scattered support: non-finite position");
  }
  for (Eigen::Index d = 0; d < positions.cols(); ++d) {
    const auto& b = bounds[static_cast<std::size_t>(d)];
    if (positions.col(d).minCoeff() < b.lo || positions.col(d).maxCoeff() > b.hi) {
      throw std::invalid_argument("scattered support: point outside bounds");
    }
  }
  Support s;
  s.kind_ = SupportKind::kScattered;
  s.positions_ = std::move(positions);
  s.bounds_ = std::move(bounds);
  return s;
}

double Support::spacing() const {
  if (kind_ != SupportKind::kGrid) {
    throw std::invalid_argument("scattered supports have no grid spacing");
  }
  return spacing_;
}

// ---------------------------------------------------------------------------
// ProbabilityMap

ProbabilityMap::ProbabilityMap(SupportPtr support, Tensor weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (!support_) throw InvalidMap("probability map without support");
  if (weights_.shape() != Shape{support_->size()}) {
    throw InvalidMap("weights of shape " + to_string(weights_.shape()) +
                     " for a support of " + std::to_string(support_->size()) +
                     " points");
  }
  const Array& w = weights_.values();
  if ((w < 0.0).any()) throw InvalidMap("negative weight");
  if (std::abs(w.sum() - 1.0) > 1e-9) {
    throw InvalidMap("weights sum to " + std::to_string(w.sum()));
  }
}

ProbabilityMap ProbabilityMap::from_logits(SupportPtr support,
                                           const Tensor& logits) {
  return ProbabilityMap(std::move(support), softmax(logits, 0));
}

// ---------------------------------------------------------------------------
// MixtureSpec

double MixtureSpec::scale(const Support& support) const {
  if (basis == Basis::kGaussian) {
    if (sigma) return *sigma;
    return support.spacing();
  }
  return support.spacing();
}

void MixtureSpec::validate(const Support& support) const {
  if (support.kind() == SupportKind::kScattered) {
    if (basis != Basis::kGaussian) {
      throw std::invalid_argument(
          "scattered supports only admit the gaussian basis");
    }
    if (!sigma) {
      throw std::invalid_argument("scattered supports need an explicit sigma");
    }
  }
  if (sigma && !(*sigma > 0.0 && std::isfinite(*sigma))) {
    throw std::invalid_argument("sigma must be positive");
  }
}

// ---------------------------------------------------------------------------
// Noise

NoiseDraw draw_noise(std::uint64_t seed, std::uint64_t draw_index,
                     std::size_t n, std::size_t dims) {
  if (n == 0) throw std::invalid_argument("draw_noise: n must be >= 1");
  auto engine = make_engine(seed, draw_index);
  NoiseDraw draw;
  draw.gumbels.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < draw.gumbels.size(); ++i) {
    draw.gumbels[i] = gumbel_from_uniform(open_uniform(engine));
  }
  draw.basis_uniforms.resize(static_cast<Eigen::Index>(n),
                             static_cast<Eigen::Index>(dims));
  for (Eigen::Index i = 0; i < draw.basis_uniforms.rows(); ++i) {
    for (Eigen::Index d = 0; d < draw.basis_uniforms.cols(); ++d) {
      draw.basis_uniforms(i, d) = open_uniform(engine);
    }
  }
  return draw;
}

NoiseDraw NoiseStream::next(std::size_t n, std::size_t dims) {
  return draw_noise(seed_, next_++, n, dims);
}

// ---------------------------------------------------------------------------
// Densities and moments

double basis_pdf(const MixtureSpec& spec, const Support& support,
                 std::size_t i, const Point& y) {
  const double scale = spec.scale(support);
  const auto& pos = support.positions();
  const auto row = static_cast<Eigen::Index>(i);
  double density = 1.0;
  for (Eigen::Index d = 0; d < pos.cols(); ++d) {
    density *= basis_pdf_1d(spec.basis, y[d] - pos(row, d), scale);
  }
  return density;
}

double mixture_pdf(const ProbabilityMap& map, const MixtureSpec& spec,
                   const Point& y) {
  const Support& support = map.support();
  if (static_cast<std::size_t>(y.size()) != support.dims()) {
    throw std::invalid_argument("mixture_pdf: query dimension mismatch");
  }
  const Array& w = map.weight_values();
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double wi = w[static_cast<Eigen::Index>(i)];
    if (wi != 0.0) total += wi * basis_pdf(spec, support, i, y);
  }
  return total;
}

double mixture_pdf(const ProbabilityMap& map, const MixtureSpec& spec,
                   double y) {
  return mixture_pdf(map, spec, Point::Constant(1, y));
}

Moments mixture_moments(const ProbabilityMap& map, const MixtureSpec& spec) {
  const Support& support = map.support();
  const auto& pos = support.positions();
  const Array& w = map.weight_values();
  const double kernel_variance = basis_variance_1d(spec.basis, spec.scale(support));

  Moments m;
  m.mean = Point::Zero(pos.cols());
  Eigen::VectorXd second = Eigen::VectorXd::Zero(pos.cols());
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    for (Eigen::Index d = 0; d < pos.cols(); ++d) {
      m.mean[d] += w[i] * pos(i, d);
      second[d] += w[i] * (pos(i, d) * pos(i, d) + kernel_variance);
    }
  }
  m.variance = second - m.mean.cwiseProduct(m.mean);
  return m;
}

double mixture_cdf(const ProbabilityMap& map, const MixtureSpec& spec,
                   double y) {
  const Support& support = map.support();
  if (support.dims() != 1) {
    throw std::invalid_argument("mixture_cdf is defined for 1-D supports only");
  }
  const double scale = spec.scale(support);
  const auto& pos = support.positions();
  const Array& w = map.weight_values();
  double total = 0.0;
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    total += w[i] * basis_cdf_1d(spec.basis, y - pos(i, 0), scale);
  }
  return std::clamp(total, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Sampling

Point basis_sample(const MixtureSpec& spec, const Support& support,
                   std::size_t i, const Eigen::Ref<const Eigen::VectorXd>& u) {
  if (static_cast<std::size_t>(u.size()) != support.dims()) {
    throw std::invalid_argument("basis_sample: one uniform per axis");
  }
  if (i >= support.size()) throw std::out_of_range("basis_sample: index");
  const double scale = spec.scale(support);
  Point y = support.position(i);
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    y[d] += basis_quantile_1d(spec.basis, u[d], scale);
  }
  return y;
}

std::size_t gumbel_argmax(const Array& weights, const Eigen::VectorXd& gumbels) {
  if (weights.size() != gumbels.size()) {
    throw std::invalid_argument("gumbel_argmax: size mismatch");
  }
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    const double score = gumbels[i] + std::log(std::max(weights[i], 1e-12));
    if (score > best_score) {
      best_score = score;
      best = static_cast<std::size_t>(i);
    }
  }
  return best;
}

Point reference_sample(const ProbabilityMap& map, const MixtureSpec& spec,
                       const NoiseDraw& noise) {
  const std::size_t pick = gumbel_argmax(map.weight_values(), noise.gumbels);
  return basis_sample(spec, map.support(), pick,
                      noise.basis_uniforms.row(static_cast<Eigen::Index>(pick)).transpose());
}

// ---------------------------------------------------------------------------
// Goodness of fit

double ks_statistic(std::span<const double> samples,
                    const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    stat = std::max({stat, above, below});
  }
  return stat;
}

double ks_critical_value(std::size_t n, double alpha) {
  if (n == 0 || !(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("ks_critical_value: bad arguments");
  }
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) /
         std::sqrt(static_cast<double>(n));
}

}  // namespace sargmax
