#include "sargmax/harness/task.hpp"

#include "sargmax/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sargmax::harness {
namespace {

constexpr std::uint64_t kSplitTag = 0x5B117000;

std::uint64_t split_seed(const SyntheticTask& task, Split split) {
  return derive_seed(task.seed, kSplitTag + static_cast<std::uint64_t>(split));
}

// Unit-height bump: parabolic core for |s| <= 1, exponential tails of width
// `left` / `right` beyond it. Strictly decreasing in |s| on each side.
double bump(double s, double left, double right) {
  const double a = std::abs(s);
  if (a <= 1.0) return 1.0 - 0.5 * a * a;
  return 0.5 * std::exp(-(a - 1.0) / (s < 0 ? left : right));
}

Example signal_example(const SyntheticTask& task, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(task.size);
  const double target = uniform_in(rng, 0.0, static_cast<double>(n - 1));
  const double amplitude = uniform_in(rng, 0.5, 1.5);
  const double left = uniform_in(rng, 1.0, 4.0);
  const double right = uniform_in(rng, 1.0, 4.0);
  const double noise = task.noise * uniform_in(rng, 0.2, 2.0);
  Eigen::VectorXd obs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    obs[i] = amplitude * bump(static_cast<double>(i) - target, left, right);
  }
  if (task.noise > 0) {
    for (Eigen::Index i = 0; i < n; ++i) obs[i] += noise * standard_normal(rng);
  }
  return {obs, Point::Constant(1, target)};
}

Example heatmap_example(const SyntheticTask& task, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(task.size);
  const double hi = static_cast<double>(n - 1);
  Point target(2);
  target << uniform_in(rng, 0.0, hi), uniform_in(rng, 0.0, hi);
  const double amplitude = uniform_in(rng, 0.5, 1.5);
  const double width = uniform_in(rng, 1.0, 2.5);
  const double noise = task.noise * uniform_in(rng, 0.2, 2.0);
  Eigen::VectorXd obs(n * n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const double dr = static_cast<double>(r) - target[0];
      const double dc = static_cast<double>(c) - target[1];
      obs[r * n + c] =
          amplitude * std::exp(-(dr * dr + dc * dc) / (2 * width * width));
    }
  }
  if (task.noise > 0) {
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
      obs[i] += noise * standard_normal(rng);
    }
  }
  return {obs, target};
}

Example scatter_example(const SyntheticTask& task, const Eigen::MatrixXd& cloud,
                        std::mt19937_64& rng) {
  Point target(3);
  do {
    for (Eigen::Index k = 0; k < 3; ++k) target[k] = standard_normal(rng);
  } while (target.norm() < 1e-6);
  target.normalize();
  const double amplitude = uniform_in(rng, 0.5, 1.5);
  const double width = uniform_in(rng, 0.15, 0.3);
  const double noise = task.noise * uniform_in(rng, 0.2, 2.0);
  Eigen::VectorXd obs(cloud.rows());
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const double d2 = (cloud.row(i).transpose() - target).squaredNorm();
    obs[i] = amplitude * std::exp(-d2 / (2 * width * width));
  }
  if (task.noise > 0) {
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
      obs[i] += noise * standard_normal(rng);
    }
  }
  return {obs, target};
}

void check(const SyntheticTask& task) {
  if (task.size < 2) throw std::invalid_argument("task size must be >= 2");
  if (!(task.noise >= 0)) throw std::invalid_argument("noise must be >= 0");
}

}  // namespace

const char* task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::kSignal1d: return "signal1d";
    case TaskKind::kHeatmap2d: return "heat2d";
    case TaskKind::kScatter3d: return "scatter3d";
  }
  return "?";
}

TaskKind parse_task(const std::string& name) {
  if (name == "signal1d") return TaskKind::kSignal1d;
  if (name == "heat2d") return TaskKind::kHeatmap2d;
  if (name == "scatter3d") return TaskKind::kScatter3d;
  throw std::invalid_argument("unknown task kind: " + name);
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

std::size_t SyntheticTask::count(Split split) const {
  switch (split) {
    case Split::kTrain: return train_count;
    case Split::kVal: return val_count;
    case Split::kTest: return test_count;
  }
  return 0;
}

SyntheticTask default_task(TaskKind kind) {
  SyntheticTask task;
  task.kind = kind;
  switch (kind) {
    case TaskKind::kSignal1d: task.size = 32; break;
    case TaskKind::kHeatmap2d: task.size = 16; break;
    case TaskKind::kScatter3d: task.size = 256; break;
  }
  return task;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  auto engine = make_engine(seed, tag);
  return engine();
}

Eigen::MatrixXd sphere_cloud(std::size_t count) {
  const auto n = static_cast<Eigen::Index>(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  Eigen::MatrixXd cloud(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * static_cast<double>(i);
    cloud.row(i) << r * std::cos(phi), r * std::sin(phi), z;
  }
  return cloud;
}

SupportPtr make_support(const SyntheticTask& task) {
  check(task);
  switch (task.kind) {
    case TaskKind::kSignal1d:
      return std::make_shared<const Support>(Support::grid({task.size}));
    case TaskKind::kHeatmap2d:
      return std::make_shared<const Support>(
          Support::grid({task.size, task.size}));
    case TaskKind::kScatter3d:
      return std::make_shared<const Support>(Support::scattered(
          sphere_cloud(task.size), std::vector<Interval>(3, {-1.0, 1.0})));
  }
  throw std::invalid_argument("unknown task kind");
}

MixtureSpec make_spec(const SyntheticTask& task, const Support& support,
                      Basis basis) {
  if (task.kind != TaskKind::kScatter3d) return MixtureSpec{basis, std::nullopt};
  const Eigen::MatrixXd& pos = support.positions();
  double total = 0.0;
  for (Eigen::Index i = 0; i < pos.rows(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < pos.rows(); ++j) {
      if (j != i) nearest = std::min(nearest, (pos.row(i) - pos.row(j)).norm());
    }
    total += nearest;
  }
  return MixtureSpec{Basis::kGaussian, total / static_cast<double>(pos.rows())};
}

std::size_t observation_size(const SyntheticTask& task) {
  return task.kind == TaskKind::kHeatmap2d ? task.size * task.size : task.size;
}

Example generate_example(const SyntheticTask& task, Split split,
                         std::size_t index) {
  check(task);
  auto rng = make_engine(split_seed(task, split), index);
  switch (task.kind) {
    case TaskKind::kSignal1d: return signal_example(task, rng);
    case TaskKind::kHeatmap2d: return heatmap_example(task, rng);
    case TaskKind::kScatter3d:
      return scatter_example(task, sphere_cloud(task.size), rng);
  }
  throw std::invalid_argument("unknown task kind");
}

std::vector<Example> generate_task(const SyntheticTask& task, Split split) {
  check(task);
  const std::size_t count = task.count(split);
  std::vector<Example> out;
  out.reserve(count);
  auto cloud = task.kind == TaskKind::kScatter3d ? sphere_cloud(task.size)
                                                 : Eigen::MatrixXd();
  const std::uint64_t seed = split_seed(task, split);
  for (std::size_t i = 0; i < count; ++i) {
    auto rng = make_engine(seed, i);
    switch (task.kind) {
      case TaskKind::kSignal1d: out.push_back(signal_example(task, rng)); break;
      case TaskKind::kHeatmap2d: out.push_back(heatmap_example(task, rng)); break;
      case TaskKind::kScatter3d:
        out.push_back(scatter_example(task, cloud, rng));
        break;
    }
  }
  return out;
}

}  // namespace sargmax::harness
