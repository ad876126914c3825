// Command-line front end: train, eval, gradcheck, distcheck, varcompare,
// calibrate. Every option may also come from a TOML file given with
// --config; command-line flags take precedence.

#include "report.hpp"

#include "sargmax/harness/metrics.hpp"
#include "sargmax/harness/suites.hpp"
#include "sargmax/harness/training.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace {

using namespace sargmax;
using namespace sargmax::harness;

struct Options {
  std::string task = "signal1d";
  std::string loss = "soft";
  std::string basis = "triangular";
  std::string anneal = "exponential";
  std::size_t num_samples;
  double tau_start;
  double tau_end;
  double sigma_t_sq;
  std::optional<double> reg_weight;
  std::size_t epochs;
  std::size_t batch;
  double lr;
  std::size_t hidden;
  std::uint64_t seed;
  std::optional<std::size_t> size;
  double noise;
  std::size_t train_count;
  std::size_t val_count;
  std::size_t test_count;
  std::string out;
  std::string model;
  std::string model_out;
  std::string split = "test";
  std::optional<std::size_t> seeds;
  std::size_t draws = 0;
  std::size_t maps = 20;
  double alpha = 0.01;
  double tau = 1.0;
  std::size_t jobs = 1;

  Options() {
    const RunConfig d;
    num_samples = d.sampling.num_samples;
    tau_start = d.sampling.tau_start;
    tau_end = d.sampling.tau_end;
    sigma_t_sq = d.sigma_t_sq;
    epochs = d.epochs;
    batch = d.batch;
    lr = d.lr;
    hidden = d.hidden;
    seed = d.seed;
    noise = d.task.noise;
    train_count = d.task.train_count;
    val_count = d.task.val_count;
    test_count = d.task.test_count;
  }
};

RunConfig run_config(const Options& o, const std::string& loss) {
  RunConfig cfg;
  cfg.task = default_task(parse_task(o.task));
  if (o.size) cfg.task.size = *o.size;
  cfg.task.noise = o.noise;
  cfg.task.train_count = o.train_count;
  cfg.task.val_count = o.val_count;
  cfg.task.test_count = o.test_count;
  cfg.task.seed = o.seed;
  cfg.loss = parse_train_loss(loss);
  cfg.basis = parse_basis(o.basis.c_str());
  cfg.sampling.num_samples = o.num_samples;
  cfg.sampling.tau_start = o.tau_start;
  cfg.sampling.tau_end = o.tau_end;
  cfg.sampling.anneal = o.anneal == "linear" ? Anneal::kLinear : Anneal::kExponential;
  cfg.sigma_t_sq = o.sigma_t_sq;
  cfg.reg_weight = o.reg_weight;
  cfg.epochs = o.epochs;
  cfg.batch = o.batch;
  cfg.lr = o.lr;
  cfg.hidden = o.hidden;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

// CSV to --out when given, else to stdout.
void emit_csv(const Options& o, const std::string& csv) {
  if (o.out.empty()) {
    std::cout << csv;
  } else {
    cli::write_file(o.out, csv);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cmd_train(const Options& o) {
  const RunConfig cfg = run_config(o, o.loss);
  const TrainResult result = train(cfg);
  emit_csv(o, cli::history_csv(result.history));
  if (!o.model_out.empty()) cli::write_file(o.model_out, cli::model_json(result.model));
  const EpochRecord& last = result.history.back();
  std::cerr << fmt::format("{} on {}: final val mean error {:.4f}\n", o.loss, o.task,
                           last.val_mean_err);
  return 0;
}

int cmd_eval(const Options& o) {
  const RunConfig cfg = run_config(o, o.loss);
  const Split split = o.split == "val" ? Split::kVal : Split::kTest;
  const Mlp model = o.model.empty() ? train(cfg).model : cli::model_from_json(read_file(o.model));
  if (model.inputs() != observation_size(cfg.task) ||
      model.outputs() != make_support(cfg.task)->size()) {
    throw std::invalid_argument("model does not match the task dimensions");
  }
  const Evaluation eval = evaluate(model, cfg.task, split);
  emit_csv(o, cli::evaluation_csv(eval));
  std::cerr << fmt::format("{} split: mean {:.4f} median {:.4f} within-1 {:.3f} r {}\n",
                           split_name(split), eval.summary.mean_error,
                           eval.summary.median_error, eval.summary.within_one,
                           cli::num(calibration_report(eval.records)));
  return 0;
}

int cmd_gradcheck(const Options& o) {
  GradcheckOptions g;
  g.seeds = o.seeds.value_or(20);
  const GradcheckReport report = gradcheck_suite(g);
  std::cout << cli::gradcheck_table(report);
  if (!o.out.empty()) cli::write_file(o.out, cli::gradcheck_csv(report));
  return report.all_passed() ? 0 : 1;
}

int cmd_distcheck(const Options& o) {
  DistcheckOptions d;
  d.maps = o.maps;
  if (o.draws > 0) d.draws = o.draws;
  d.alpha = o.alpha;
  d.seed = o.seed;
  const DistcheckReport report = distcheck_suite(d);
  std::cout << cli::distcheck_table(report);
  if (!o.out.empty()) cli::write_file(o.out, cli::distcheck_csv(report));
  return report.hard_passed() ? 0 : 1;
}

int cmd_varcompare(const Options& o) {
  VarianceOptions v;
  v.seeds = o.seeds.value_or(10);
  if (o.draws > 0) v.draws = o.draws;
  v.tau = o.tau;
  v.basis = parse_basis(o.basis.c_str());
  const VarianceReport report = variance_compare(v);
  std::cout << cli::variance_table(report);
  if (!o.out.empty()) cli::write_file(o.out, cli::variance_csv(report));
  return report.all_passed() ? 0 : 1;
}

// Paired runs: soft-argmax and the chosen loss on the same data and seeds.
int cmd_calibrate(const Options& o, bool loss_given) {
  const std::string other = loss_given ? o.loss : "samp";
  const std::vector<std::string> losses{"soft", other};
  const std::size_t seeds = o.seeds.value_or(5);
  std::vector<std::pair<std::uint64_t, std::string>> jobs;
  for (std::size_t s = 0; s < seeds; ++s) {
    for (const auto& loss : losses) jobs.emplace_back(o.seed + s, loss);
  }
  std::vector<cli::CalibrationRow> rows(jobs.size());
  std::vector<std::string> errors(jobs.size());
  auto run = [&](std::size_t j) {
    try {
      Options oj = o;
      oj.seed = jobs[j].first;
      const RunConfig cfg = run_config(oj, jobs[j].second);
      const Evaluation eval = evaluate(train(cfg).model, cfg.task, Split::kTest);
      rows[j] = {jobs[j].first, jobs[j].second, eval.summary, calibration_report(eval.records)};
    } catch (const std::exception& e) {
      errors[j] = e.what();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(o.jobs, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t j = w; j < jobs.size(); j += workers) run(j);
    });
  }
  for (auto& t : pool) t.join();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!errors[j].empty()) throw std::runtime_error(errors[j]);
  }
  std::cout << cli::calibration_table(rows);
  if (!o.out.empty()) cli::write_file(o.out, cli::calibration_csv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sampling-argmax experiments"};
  app.set_config("--config", "", "TOML file with option values; flags override it");
  app.require_subcommand(1);
  Options o;

  app.add_option("--task", o.task, "signal1d, heat2d or scatter3d")
      ->check(CLI::IsMember({"signal1d", "heat2d", "scatter3d"}))
      ->capture_default_str();
  auto* loss_opt = app.add_option("--loss", o.loss, "soft, discrete, samp, soft-vr or soft-dr")
                       ->check(CLI::IsMember({"soft", "discrete", "samp", "soft-vr", "soft-dr"}))
                       ->capture_default_str();
  app.add_option("--basis", o.basis, "uniform, triangular or gaussian")
      ->check(CLI::IsMember({"uniform", "triangular", "gaussian"}))
      ->capture_default_str();
  app.add_option("--anneal", o.anneal, "exponential or linear")
      ->check(CLI::IsMember({"exponential", "linear"}))
      ->capture_default_str();
  app.add_option("--num-samples", o.num_samples, "samples per example (samp)")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--tau-start", o.tau_start)->capture_default_str();
  app.add_option("--tau-end", o.tau_end)->capture_default_str();
  app.add_option("--sigma-t-sq", o.sigma_t_sq, "regularizer target variance")->capture_default_str();
  app.add_option("--reg-weight", o.reg_weight, "regularizer weight (default 1 soft-vr, 0.1 soft-dr)");
  app.add_option("--epochs", o.epochs)->capture_default_str();
  app.add_option("--batch", o.batch)->capture_default_str();
  app.add_option("--lr", o.lr, "SGD step size")->capture_default_str();
  app.add_option("--hidden", o.hidden, "hidden width")->capture_default_str();
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--size", o.size, "grid extent or point count");
  app.add_option("--noise", o.noise, "observation noise level")->capture_default_str();
  app.add_option("--train-count", o.train_count)->capture_default_str();
  app.add_option("--val-count", o.val_count)->capture_default_str();
  app.add_option("--test-count", o.test_count)->capture_default_str();
  app.add_option("--out", o.out, "CSV output path (train/eval default to stdout)");
  app.add_option("--model", o.model, "eval: model file from train --model-out");
  app.add_option("--model-out", o.model_out, "train: write the model here");
  app.add_option("--split", o.split, "eval split")
      ->check(CLI::IsMember({"val", "test"}))->capture_default_str();
  app.add_option("--seeds", o.seeds, "seed count for gradcheck, varcompare, calibrate");
  app.add_option("--draws", o.draws, "draws per map (distcheck, varcompare)");
  app.add_option("--maps", o.maps, "distcheck reference maps")->capture_default_str();
  app.add_option("--alpha", o.alpha, "distcheck KS level")->capture_default_str();
  app.add_option("--tau", o.tau, "varcompare temperature")->capture_default_str();
  app.add_option("--jobs", o.jobs, "calibrate worker threads")->capture_default_str();

  const std::vector<std::pair<const char*, const char*>> commands{
      {"train", "train a model and write the per-epoch history"},
      {"eval", "evaluate a model and write per-example records"},
      {"gradcheck", "finite-difference check of every loss"},
      {"distcheck", "sampler distribution checks"},
      {"varcompare", "score-function vs reparameterized gradient variance"},
      {"calibrate", "paired soft / sampled runs with calibration statistics"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  CLI11_PARSE(app, argc, argv);
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "train") return cmd_train(o);
    if (cmd == "eval") return cmd_eval(o);
    if (cmd == "gradcheck") return cmd_gradcheck(o);
    if (cmd == "distcheck") return cmd_distcheck(o);
    if (cmd == "varcompare") return cmd_varcompare(o);
    return cmd_calibrate(o, loss_opt->count() > 0);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
