#pragma once

// Two-layer perceptron heatmap model, SGD training for every loss and
// deterministic evaluation.

#include "sargmax/harness/task.hpp"
#include "sargmax/localize.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sargmax::harness {

// observation -> relu(W1 x + b1) -> W2 h + b2 = logits over the support.
class Mlp {
 public:
  // Weights uniform in +-1/sqrt(fan_in), biases zero.
  Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs,
      std::uint64_t seed);
  Mlp(Tensor w1, Tensor b1, Tensor w2, Tensor b2);

  // [B, inputs] -> [B, outputs]
  Tensor logits(const Tensor& batch) const;

  // w1 [in, hidden], b1 [hidden], w2 [hidden, out], b2 [out]. Copies share
  // storage with the model.
  std::vector<Tensor> parameters() const { return {w1_, b1_, w2_, b2_}; }

  std::size_t inputs() const { return w1_.shape()[0]; }
  std::size_t hidden() const { return w1_.shape()[1]; }
  std::size_t outputs() const { return w2_.shape()[1]; }

 private:
  Tensor w1_, b1_, w2_, b2_;
};

enum class TrainLoss { kSoft, kDiscrete, kSampled, kSoftVariance, kSoftJs };

const char* train_loss_name(TrainLoss loss);
TrainLoss parse_train_loss(const std::string& name);

struct RunConfig {
  SyntheticTask task;
  TrainLoss loss = TrainLoss::kSoft;
  Basis basis = Basis::kTriangular;
  // N_s = 5, tau annealed exponentially from 1.0 to 0.5.
  SamplingConfig sampling{.num_samples = 5, .tau_start = 1.0, .tau_end = 0.5};
  double sigma_t_sq = 4.0;
  // Defaults to 1 for the variance regularizer and 0.1 for JS.
  std::optional<double> reg_weight;
  double lr = 0.1;
  std::size_t epochs = 60;
  std::size_t batch = 32;
  std::size_t hidden = 64;
  std::uint64_t seed = 0;

  double regularizer_weight() const;
  void validate() const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;          // mean training objective over the epoch
  double val_mean_err = 0.0;
  double tau = 0.0;           // temperature of the epoch's last step
};

struct TrainResult {
  Mlp model;
  std::vector<EpochRecord> history;
};

// Model and noise seeds derive from cfg.seed; data comes from cfg.task.
TrainResult train(const RunConfig& cfg);

// Per-example objective of `cfg.loss` on one map.
Tensor example_loss(const RunConfig& cfg, const ProbabilityMap& map,
                    const MixtureSpec& spec, const Point& target, double tau,
                    NoiseStream& noise);

struct TrialRecord {
  Point prediction;
  Point target;
  double peak = 0.0;   // max_i pi_i
  double error = 0.0;  // l1 distance
};

struct EvalSummary {
  std::size_t count = 0;
  double mean_error = 0.0;
  double median_error = 0.0;
  double within_one = 0.0;  // fraction with error <= one cell
};

struct Evaluation {
  std::vector<TrialRecord> records;
  EvalSummary summary;
};

// One cell: the grid spacing, or the spec's sigma on scattered supports.
double cell_size(const Support& support, const MixtureSpec& spec);

EvalSummary summarize(const std::vector<TrialRecord>& records, double cell);

using MapFunction = std::function<ProbabilityMap(const Example&)>;

// Localises every example with inference_localize on the map from `predict`.
Evaluation evaluate_maps(const std::vector<Example>& examples,
                         const MapFunction& predict, double cell);

Evaluation evaluate(const Mlp& model, const SyntheticTask& task, Split split);

}  // namespace sargmax::harness
