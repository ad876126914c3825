#include "sargmax/harness/suites.hpp"

#include "sargmax/harness/task.hpp"
#include "sargmax/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace sargmax::harness {
namespace {

constexpr std::uint64_t kLogitTag = 0x10617;
constexpr std::uint64_t kTargetTag = 0x7A26E7;
constexpr std::uint64_t kNoiseTag = 0x4015E;

SupportPtr grid_support(std::vector<std::size_t> extents) {
  return std::make_shared<const Support>(Support::grid(std::move(extents)));
}

ProbabilityMap map_from(const SupportPtr& support, const Tensor& logits) {
  return ProbabilityMap::from_logits(support, logits);
}

}  // namespace

Eigen::VectorXd random_logits(std::uint64_t seed, std::size_t n) {
  auto rng = make_engine(seed, kLogitTag);
  Eigen::VectorXd logits(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    logits[i] = uniform_in(rng, -2.0, 2.0);
  }
  return logits;
}

Point random_target(std::uint64_t seed, const Support& support) {
  auto rng = make_engine(seed, kTargetTag);
  Point t(static_cast<Eigen::Index>(support.dims()));
  for (std::size_t k = 0; k < support.dims(); ++k) {
    t[static_cast<Eigen::Index>(k)] =
        uniform_in(rng, support.bounds()[k].lo, support.bounds()[k].hi);
  }
  return t;
}

// ---------------------------------------------------------------- gradcheck

std::vector<LossCase> default_loss_cases(double tau) {
  std::vector<LossCase> cases;
  cases.push_back({"soft", [](const SupportPtr& support, const MixtureSpec&,
                              const Eigen::VectorXd&, std::uint64_t seed) -> ScalarFunction {
                     const Point t = random_target(seed, *support);
                     return [support, t](const Tensor& x) {
                       return error_of_expectation_loss(map_from(support, x), t);
                     };
                   }});
  cases.push_back({"discrete", [](const SupportPtr& support, const MixtureSpec&,
                                  const Eigen::VectorXd&, std::uint64_t seed) -> ScalarFunction {
                     const Point t = random_target(seed, *support);
                     return [support, t](const Tensor& x) {
                       return discrete_expected_error_loss(map_from(support, x), t);
                     };
                   }});
  cases.push_back({"samp", [tau](const SupportPtr& support, const MixtureSpec& spec,
                                 const Eigen::VectorXd&, std::uint64_t seed) -> ScalarFunction {
                     const Point t = random_target(seed, *support);
                     SamplingConfig cfg;
                     cfg.num_samples = 2;
                     const std::uint64_t noise_seed = derive_seed(seed, kNoiseTag);
                     return [support, spec, t, cfg, tau, noise_seed](const Tensor& x) {
                       NoiseStream frozen(noise_seed);
                       return sampled_expected_error_loss(map_from(support, x), spec, t,
                                                          cfg, tau, frozen);
                     };
                   }});
  cases.push_back({"variance", [](const SupportPtr& support, const MixtureSpec&,
                                  const Eigen::VectorXd&, std::uint64_t) -> ScalarFunction {
                     return [support](const Tensor& x) {
                       return variance_regularizer(map_from(support, x), 4.0);
                     };
                   }});
  cases.push_back({"js", [](const SupportPtr& support, const MixtureSpec&,
                            const Eigen::VectorXd& logits, std::uint64_t) -> ScalarFunction {
                     // The centre is detached, so it is frozen at the base point.
                     const Point center =
                         inference_localize(map_from(support, Tensor::vector(logits)));
                     return [support, center](const Tensor& x) {
                       return js_regularizer(map_from(support, x), 4.0, center);
                     };
                   }});
  return cases;
}

bool GradcheckReport::all_passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const GradcheckRow& r) { return r.passed; });
}

GradcheckReport gradcheck_suite(const GradcheckOptions& options) {
  GradcheckReport report;
  for (const LossCase& loss : options.cases) {
    for (Basis basis : options.bases) {
      for (std::size_t dims : options.dims) {
        const SupportPtr support =
            dims == 1 ? grid_support({8}) : grid_support(std::vector<std::size_t>(dims, 4));
        const MixtureSpec spec{basis, std::nullopt};
        for (std::uint64_t seed = 0; seed < options.seeds; ++seed) {
          GradcheckRow row{loss.name, basis, dims, seed, 0.0, false};
          try {
            const Eigen::VectorXd logits = random_logits(seed, support->size());
            const ScalarFunction f = loss.make(support, spec, logits, seed);
            const GradCheckReport r =
                grad_check(f, Tensor::vector(logits), options.step, options.tol);
            row.max_relative_error = r.max_relative_error;
            row.passed = r.passed;
          } catch (const std::exception&) {
            row.max_relative_error = std::numeric_limits<double>::infinity();
            row.passed = false;
          }
          report.rows.push_back(row);
        }
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------- distcheck

bool DistcheckReport::hard_passed() const {
  return std::all_of(rows.begin(), rows.end(),
                     [](const DistcheckRow& r) { return !r.hard || r.passed; });
}

DistcheckReport distcheck_suite(const DistcheckOptions& o) {
  DistcheckReport report;
  const SupportPtr support = grid_support({o.bins});
  const std::vector<Basis> bases{Basis::kUniform, Basis::kTriangular, Basis::kGaussian};
  const double critical = ks_critical_value(o.draws, o.alpha);
  const auto n = static_cast<Eigen::Index>(o.bins);

  // Exact sampler: one noise stream per map, shared by the three bases.
  for (std::uint64_t m = 0; m < o.maps; ++m) {
    const std::uint64_t map_seed = o.seed + m;
    const ProbabilityMap map =
        ProbabilityMap::from_logits(support, Tensor::vector(random_logits(map_seed, o.bins)));
    std::vector<std::vector<double>> samples(bases.size());
    for (auto& s : samples) s.reserve(o.draws);
    NoiseStream stream(derive_seed(map_seed, kNoiseTag));
    for (std::size_t k = 0; k < o.draws; ++k) {
      const NoiseDraw noise = stream.next(o.bins, 1);
      for (std::size_t b = 0; b < bases.size(); ++b) {
        samples[b].push_back(reference_sample(map, MixtureSpec{bases[b], std::nullopt}, noise)[0]);
      }
    }
    for (std::size_t b = 0; b < bases.size(); ++b) {
      const MixtureSpec spec{bases[b], std::nullopt};
      const double ks = ks_statistic(samples[b], [&](double y) { return mixture_cdf(map, spec, y); });
      report.rows.push_back({"reference-ks", bases[b], map_seed, 0.0, ks, critical, true, ks < critical});

      const Moments mom = mixture_moments(map, spec);
      double mean = 0.0;
      for (double y : samples[b]) mean += y;
      mean /= static_cast<double>(samples[b].size());
      const double z = std::abs(mean - mom.mean[0]) /
                       std::sqrt(mom.variance[0] / static_cast<double>(samples[b].size()));
      report.rows.push_back({"moments", bases[b], map_seed, 0.0, z, 4.0, false, z < 4.0});
    }
  }

  // Relaxed sampler on the same draws for every tau and basis.
  NoGradScope no_grad;
  for (std::uint64_t m = 0; m < o.relaxed_maps; ++m) {
    const std::uint64_t map_seed = o.seed + m;
    const ProbabilityMap map =
        ProbabilityMap::from_logits(support, Tensor::vector(random_logits(map_seed, o.bins)));
    const Array& pi = map.weight_values();
    std::vector<Eigen::VectorXd> counts(o.taus.size(), Eigen::VectorXd::Zero(n));
    std::vector<std::vector<std::vector<double>>> samples(
        o.taus.size(), std::vector<std::vector<double>>(bases.size()));
    NoiseStream stream(derive_seed(map_seed, kNoiseTag));
    for (std::size_t k = 0; k < o.draws; ++k) {
      const NoiseDraw noise = stream.next(o.bins, 1);
      std::vector<Eigen::MatrixXd> draws;
      for (Basis basis : bases) draws.push_back(kernel_draws(map, MixtureSpec{basis, std::nullopt}, noise));
      for (std::size_t t = 0; t < o.taus.size(); ++t) {
        const Tensor relaxed = gumbel_softmax(map, noise, o.taus[t]);
        Eigen::Index top = 0;
        relaxed.values().maxCoeff(&top);
        counts[t][top] += 1.0;
        for (std::size_t b = 0; b < bases.size(); ++b) {
          samples[t][b].push_back(matmul(relaxed, Tensor::matrix(draws[b])).item());
        }
      }
    }
    for (std::size_t t = 0; t < o.taus.size(); ++t) {
      const double dev = (counts[t] / static_cast<double>(o.draws) - pi.matrix()).cwiseAbs().maxCoeff();
      report.rows.push_back({"relaxed-freq", Basis::kTriangular, map_seed, o.taus[t], dev,
                             o.freq_tol, true, dev <= o.freq_tol});
    }
    for (std::size_t b = 0; b < bases.size(); ++b) {
      const MixtureSpec spec{bases[b], std::nullopt};
      std::vector<double> ks(o.taus.size());
      for (std::size_t t = 0; t < o.taus.size(); ++t) {
        ks[t] = ks_statistic(samples[t][b], [&](double y) { return mixture_cdf(map, spec, y); });
        report.rows.push_back({"relaxed-ks", bases[b], map_seed, o.taus[t], ks[t], critical,
                               false, ks[t] < critical});
      }
      const auto lo = std::min_element(o.taus.begin(), o.taus.end()) - o.taus.begin();
      const auto hi = std::max_element(o.taus.begin(), o.taus.end()) - o.taus.begin();
      report.rows.push_back({"relaxed-ks-order", bases[b], map_seed, o.taus[lo], ks[lo], ks[hi],
                             true, ks[lo] < ks[hi]});
    }
  }

  // One-hot maps: the exact sampler must stay on the forced kernel.
  for (Basis basis : bases) {
    const MixtureSpec spec{basis, std::nullopt};
    const std::size_t forced = o.bins / 2;
    Array w = Array::Zero(n);
    w[static_cast<Eigen::Index>(forced)] = 1.0;
    const ProbabilityMap map(support, Tensor({o.bins}, w));
    const double y0 = support->position(forced)[0];
    const double half = basis == Basis::kUniform ? 0.5 : (basis == Basis::kTriangular ? 1.0 : INFINITY);
    const std::size_t count = std::min<std::size_t>(o.draws, 10000);
    NoiseStream stream(derive_seed(o.seed, kNoiseTag + 1));
    double worst = 0.0;
    bool ok = true;
    for (std::size_t k = 0; k < count; ++k) {
      const NoiseDraw noise = stream.next(o.bins, 1);
      ok = ok && gumbel_argmax(w, noise.gumbels) == forced;
      const double y = reference_sample(map, spec, noise)[0];
      ok = ok && std::isfinite(y);
      worst = std::max(worst, std::abs(y - y0));
    }
    ok = ok && worst <= half;
    report.rows.push_back({"one-hot", basis, o.seed, 0.0, worst, half, true, ok});
  }
  return report;
}

// -------------------------------------------------------------- varcompare

bool VarianceReport::all_passed() const {
  return !rows.empty() &&
         std::all_of(rows.begin(), rows.end(), [](const VarianceRow& r) { return r.passed; });
}

VarianceReport variance_compare(const VarianceOptions& o) {
  if (o.seeds == 0) throw std::invalid_argument("variance_compare: seeds must be >= 1");
  if (o.draws < 2) throw std::invalid_argument("variance_compare: draws must be >= 2");
  const SupportPtr support = grid_support({o.bins});
  const MixtureSpec spec{o.basis, std::nullopt};
  const auto n = static_cast<Eigen::Index>(o.bins);
  SamplingConfig single;
  single.num_samples = 1;

  VarianceReport report;
  for (std::uint64_t seed = 0; seed < o.seeds; ++seed) {
    const Eigen::VectorXd logits = random_logits(seed, o.bins);
    const Point target = random_target(seed, *support);
    Eigen::MatrixXd sf(static_cast<Eigen::Index>(o.draws), n);
    Eigen::MatrixXd rp(static_cast<Eigen::Index>(o.draws), n);
    NoiseStream stream(derive_seed(seed + o.noise_offset, kNoiseTag));
    for (std::size_t k = 0; k < o.draws; ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      const std::uint64_t index = stream.position();
      {
        // d(y_t, y_i) * grad log pi_i with i drawn exactly.
        const NoiseDraw noise = stream.next(o.bins, 1);
        Tensor x = Tensor::vector(logits);
        x.requires_grad(true);
        GradientTape tape;
        RecordingScope scope(tape);
        const ProbabilityMap map = ProbabilityMap::from_logits(support, x);
        const std::size_t i = gumbel_argmax(map.weight_values(), noise.gumbels);
        const double err = distance(target, support->position(i), Distance::kL1);
        backward(floored_log(index_select(map.weights(), 0, {i})) * err);
        sf.row(row) = x.grad()->matrix().transpose();
      }
      {
        NoiseStream same(stream.seed(), index);
        Tensor x = Tensor::vector(logits);
        x.requires_grad(true);
        GradientTape tape;
        RecordingScope scope(tape);
        const ProbabilityMap map = ProbabilityMap::from_logits(support, x);
        backward(sampled_expected_error_loss(map, spec, target, single, o.tau, same));
        rp.row(row) = x.grad()->matrix().transpose();
      }
    }
    auto column_variance = [&](const Eigen::MatrixXd& g) {
      const Eigen::RowVectorXd mean = g.colwise().mean();
      return ((g.rowwise() - mean).array().square().colwise().sum() /
              static_cast<double>(g.rows() - 1))
          .matrix()
          .eval();
    };
    const Eigen::RowVectorXd var_sf = column_variance(sf);
    const Eigen::RowVectorXd var_rp = column_variance(rp);
    VarianceRow r;
    r.seed = seed;
    r.trace_sf = var_sf.sum();
    r.trace_rp = var_rp.sum();
    r.ratio = r.trace_sf / r.trace_rp;
    r.coord_fraction = (var_sf.array() > var_rp.array()).cast<double>().mean();
    r.passed = r.ratio > 1.0;
    report.rows.push_back(r);
  }
  return report;
}

}  // namespace sargmax::harness
