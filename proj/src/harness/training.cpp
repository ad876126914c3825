#include "sargmax/harness/training.hpp"

#include "sargmax/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace sargmax::harness {
namespace {

constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kShuffleTag = 0x5AFF;
constexpr std::uint64_t kNoiseTag = 0x4015E;

Tensor uniform_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                      double bound) {
  Array values(static_cast<Eigen::Index>(rows * cols));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    values[i] = uniform_in(rng, -bound, bound);
  }
  return Tensor({rows, cols}, values);
}

Tensor stack_observations(const std::vector<Example>& examples,
                          std::span<const std::size_t> order) {
  const std::size_t m = static_cast<std::size_t>(examples[order[0]].observation.size());
  Array values(static_cast<Eigen::Index>(order.size() * m));
  for (std::size_t r = 0; r < order.size(); ++r) {
    values.segment(static_cast<Eigen::Index>(r * m), static_cast<Eigen::Index>(m)) =
        examples[order[r]].observation.array();
  }
  return Tensor({order.size(), m}, values);
}

// Fisher-Yates with a modulo draw; portable across standard libraries.
void shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
}

}  // namespace

Mlp::Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs,
         std::uint64_t seed) {
  if (inputs == 0 || hidden == 0 || outputs == 0) {
    throw std::invalid_argument("Mlp: sizes must be positive");
  }
  auto rng = make_engine(seed, kInitTag);
  w1_ = uniform_matrix(rng, inputs, hidden, 1.0 / std::sqrt(static_cast<double>(inputs)));
  b1_ = Tensor::zeros({hidden});
  w2_ = uniform_matrix(rng, hidden, outputs, 1.0 / std::sqrt(static_cast<double>(hidden)));
  b2_ = Tensor::zeros({outputs});
  for (Tensor* p : {&w1_, &b1_, &w2_, &b2_}) p->requires_grad(true);
}

Mlp::Mlp(Tensor w1, Tensor b1, Tensor w2, Tensor b2)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {
  if (w1_.rank() != 2 || w2_.rank() != 2 || b1_.shape() != Shape{w1_.shape()[1]} ||
      w2_.shape()[0] != w1_.shape()[1] || b2_.shape() != Shape{w2_.shape()[1]}) {
    throw ShapeError("Mlp: inconsistent parameter shapes");
  }
  for (Tensor* p : {&w1_, &b1_, &w2_, &b2_}) {
    if (p->is_leaf()) p->requires_grad(true);
  }
}

Tensor Mlp::logits(const Tensor& batch) const {
  return matmul(relu(matmul(batch, w1_) + b1_), w2_) + b2_;
}

const char* train_loss_name(TrainLoss loss) {
  switch (loss) {
    case TrainLoss::kSoft: return "soft";
    case TrainLoss::kDiscrete: return "discrete";
    case TrainLoss::kSampled: return "samp";
    case TrainLoss::kSoftVariance: return "soft-vr";
    case TrainLoss::kSoftJs: return "soft-dr";
  }
  return "?";
}

TrainLoss parse_train_loss(const std::string& name) {
  for (TrainLoss loss : {TrainLoss::kSoft, TrainLoss::kDiscrete, TrainLoss::kSampled,
                         TrainLoss::kSoftVariance, TrainLoss::kSoftJs}) {
    if (name == train_loss_name(loss)) return loss;
  }
  throw std::invalid_argument("unknown loss: " + name);
}

double RunConfig::regularizer_weight() const {
  if (reg_weight) return *reg_weight;
  return loss == TrainLoss::kSoftJs ? 0.1 : 1.0;
}

void RunConfig::validate() const {
  sampling.validate();
  if (!(sigma_t_sq > 0)) throw std::invalid_argument("sigma_t_sq must be > 0");
  if (!(regularizer_weight() >= 0)) throw std::invalid_argument("reg_weight must be >= 0");
  if (!(lr > 0)) throw std::invalid_argument("lr must be > 0");
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (batch == 0) throw std::invalid_argument("batch must be >= 1");
  if (hidden == 0) throw std::invalid_argument("hidden must be >= 1");
  if (task.train_count == 0 || task.val_count == 0) {
    throw std::invalid_argument("train and val splits must be non-empty");
  }
}

Tensor example_loss(const RunConfig& cfg, const ProbabilityMap& map,
                    const MixtureSpec& spec, const Point& target, double tau,
                    NoiseStream& noise) {
  const Distance d = cfg.sampling.distance;
  switch (cfg.loss) {
    case TrainLoss::kSoft:
      return error_of_expectation_loss(map, target, d);
    case TrainLoss::kDiscrete:
      return discrete_expected_error_loss(map, target, d);
    case TrainLoss::kSampled:
      return sampled_expected_error_loss(map, spec, target, cfg.sampling, tau, noise);
    case TrainLoss::kSoftVariance:
      return error_of_expectation_loss(map, target, d) +
             cfg.regularizer_weight() * variance_regularizer(map, cfg.sigma_t_sq);
    case TrainLoss::kSoftJs:
      return error_of_expectation_loss(map, target, d) +
             cfg.regularizer_weight() * js_regularizer(map, cfg.sigma_t_sq);
  }
  throw std::invalid_argument("unknown loss");
}

TrainResult train(const RunConfig& cfg) {
  cfg.validate();
  const SupportPtr support = make_support(cfg.task);
  const MixtureSpec spec = make_spec(cfg.task, *support, cfg.basis);
  spec.validate(*support);
  const std::vector<Example> data = generate_task(cfg.task, Split::kTrain);

  Mlp model(observation_size(cfg.task), cfg.hidden, support->size(), cfg.seed);
  std::vector<Tensor> params = model.parameters();
  auto shuffle_rng = make_engine(cfg.seed, kShuffleTag);
  NoiseStream noise(derive_seed(cfg.seed, kNoiseTag));

  const std::size_t batches = (data.size() + cfg.batch - 1) / cfg.batch;
  const std::size_t total_steps = cfg.epochs * batches;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}};
  std::size_t step = 0;
  double tau = cfg.sampling.tau_start;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch;
      const std::size_t end = std::min(begin + cfg.batch, data.size());
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      tau = anneal_tau(cfg.sampling, step, total_steps);

      GradientTape tape;
      RecordingScope scope(tape);
      Tensor objective;
      try {
        const Tensor probs = softmax(model.logits(stack_observations(data, rows)), 1);
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const ProbabilityMap map(support,
                                   reshape(index_select(probs, 0, {r}), {support->size()}));
          const Tensor loss = example_loss(cfg, map, spec, data[rows[r]].target, tau, noise);
          objective = r == 0 ? loss : objective + loss;
        }
        epoch_loss += objective.item();
        objective = objective / static_cast<double>(rows.size());
        for (Tensor& p : params) p.zero_grad();
        backward(objective);
      } catch (const NumericError& e) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", step " << step
            << " (tau " << tau << "): " << e.what();
        throw TrainingDiverged(msg.str());
      } catch (const InvalidMap& e) {
        std::ostringstream msg;
        msg << "training diverged at epoch " << epoch << ", step " << step
            << ": " << e.what();
        throw TrainingDiverged(msg.str());
      }
      for (Tensor& p : params) {
        if (p.grad()) p.assign(p.values() - cfg.lr * *p.grad());
      }
      ++step;
    }
    epoch_loss /= static_cast<double>(data.size());
    if (!std::isfinite(epoch_loss)) {
      std::ostringstream msg;
      msg << "training diverged at epoch " << epoch << ": non-finite loss";
      throw TrainingDiverged(msg.str());
    }
    const Evaluation val = evaluate(model, cfg.task, Split::kVal);
    result.history.push_back({epoch, epoch_loss, val.summary.mean_error, tau});
  }
  return result;
}

double cell_size(const Support& support, const MixtureSpec& spec) {
  return support.kind() == SupportKind::kGrid ? support.spacing()
                                              : spec.scale(support);
}

EvalSummary summarize(const std::vector<TrialRecord>& records, double cell) {
  if (records.empty()) throw std::invalid_argument("summarize: no records");
  EvalSummary s;
  s.count = records.size();
  std::vector<double> errors;
  errors.reserve(records.size());
  std::size_t within = 0;
  for (const TrialRecord& r : records) {
    errors.push_back(r.error);
    within += r.error <= cell ? 1 : 0;
  }
  s.mean_error = std::accumulate(errors.begin(), errors.end(), 0.0) /
                 static_cast<double>(errors.size());
  std::sort(errors.begin(), errors.end());
  const std::size_t mid = errors.size() / 2;
  s.median_error = errors.size() % 2 == 1 ? errors[mid]
                                          : 0.5 * (errors[mid - 1] + errors[mid]);
  s.within_one = static_cast<double>(within) / static_cast<double>(records.size());
  return s;
}

Evaluation evaluate_maps(const std::vector<Example>& examples,
                         const MapFunction& predict, double cell) {
  if (examples.empty()) throw std::invalid_argument("evaluate: empty split");
  NoGradScope no_grad;
  Evaluation out;
  out.records.reserve(examples.size());
  for (const Example& ex : examples) {
    const ProbabilityMap map = predict(ex);
    TrialRecord rec;
    rec.prediction = inference_localize(map);
    rec.target = ex.target;
    rec.peak = map.weight_values().maxCoeff();
    rec.error = distance(rec.prediction, ex.target, Distance::kL1);
    out.records.push_back(std::move(rec));
  }
  out.summary = summarize(out.records, cell);
  return out;
}

Evaluation evaluate(const Mlp& model, const SyntheticTask& task, Split split) {
  const std::vector<Example> examples = generate_task(task, split);
  if (examples.empty()) throw std::invalid_argument("evaluate: empty split");
  const SupportPtr support = make_support(task);
  const MixtureSpec spec = make_spec(task, *support, Basis::kTriangular);

  NoGradScope no_grad;
  std::vector<std::size_t> all(examples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const Tensor probs = softmax(model.logits(stack_observations(examples, all)), 1);
  const auto n = static_cast<Eigen::Index>(support->size());
  std::size_t row = 0;
  auto predict = [&](const Example&) {
    Array w = probs.values().segment(static_cast<Eigen::Index>(row++) * n, n);
    return ProbabilityMap(support, Tensor({support->size()}, std::move(w)));
  };
  return evaluate_maps(examples, predict, cell_size(*support, spec));
}

}  // namespace sargmax::harness
