#pragma once

// Seed-deterministic synthetic localisation tasks.
//
//   signal1d   length-n signal with an asymmetric bump at a continuous
//              position in [0, n-1]; per-example amplitude and noise scale
//   heat2d     n x n image with an isotropic blob at a continuous (x, y)
//   scatter3d  fixed 256-point cloud on the unit sphere with a per-point
//              feature peaking at the point nearest the target

#include "sargmax/mixture.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sargmax::harness {

enum class TaskKind { kSignal1d, kHeatmap2d, kScatter3d };
enum class Split { kTrain, kVal, kTest };

const char* task_name(TaskKind kind);
TaskKind parse_task(const std::string& name);
const char* split_name(Split split);

struct SyntheticTask {
  TaskKind kind = TaskKind::kSignal1d;
  // Grid extent per axis (signal1d, heat2d) or point count (scatter3d).
  std::size_t size = 32;
  double noise = 0.3;
  std::size_t train_count = 512;
  std::size_t val_count = 256;
  std::size_t test_count = 512;
  std::uint64_t seed = 0;

  std::size_t count(Split split) const;
};

struct Example {
  Eigen::VectorXd observation;
  Point target;
};

// Task with default size for its kind (32, 16, 256).
SyntheticTask default_task(TaskKind kind);

SupportPtr make_support(const SyntheticTask& task);

// Mixture spec matching the support: the requested basis on grids, Gaussian
// with sigma = mean nearest-neighbour distance on the point cloud.
MixtureSpec make_spec(const SyntheticTask& task, const Support& support,
                      Basis basis);

std::size_t observation_size(const SyntheticTask& task);

Example generate_example(const SyntheticTask& task, Split split,
                         std::size_t index);
std::vector<Example> generate_task(const SyntheticTask& task, Split split);

// Fibonacci lattice on the unit sphere; deterministic.
Eigen::MatrixXd sphere_cloud(std::size_t count);

// Independent 64-bit seed for a named sub-stream of `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace sargmax::harness
