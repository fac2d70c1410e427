#include "lsc/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <limits>
#include <optional>
#include <utility>

#include "lsc/backprop.hpp"
#include "lsc/errors.hpp"
#include "lsc/init.hpp"
#include "lsc/io.hpp"

namespace lsc {

void RunConfig::validate() const {
  task.validate();
  stack.validate();
  if (stack.depth() == 0) throw ConfigurationError("stack needs at least one layer");
  if (stack.channels() != task.channels) {
    throw ConfigurationError("stack expects " + std::to_string(stack.channels()) +
                             " input channels, task provides " + std::to_string(task.channels));
  }
  if (stack.readout.has_value() && stack.readout->rows() != task.classes) {
    throw ConfigurationError("readout rows must match the class count");
  }
  if (!(learning_rate > 0.0)) throw ConfigurationError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigurationError("weight decay must be non-negative");
  if (batch_size < 1) throw ConfigurationError("batch size must be at least one");
  if (early_stop_patience < 1) throw ConfigurationError("patience must be at least one");
  if (seeds.empty()) throw ConfigurationError("need at least one seed");
  if (pretrain_enabled) pretrain.validate();
}

namespace {

struct Eval {
  double loss = 0.0;
  double accuracy = 0.0;
  double perplexity = 1.0;
  bool finite = true;
};

// Numerically safe softmax cross-entropy for one step; the optional gradient
// receives (softmax - onehot) * scale.
double step_cross_entropy(const Vec& logits, std::size_t label, double scale, Vec* grad_out) {
  if (label >= logits.size()) throw DimensionError("label outside the logit range");
  double top = logits[0];
  for (double v : logits) top = std::max(top, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - top);
  const double ce = std::log(z) - (logits[label] - top);
  if (grad_out) {
    grad_out->assign(logits.size(), 0.0);
    for (std::size_t c = 0; c < logits.size(); ++c) {
      (*grad_out)[c] = std::exp(logits[c] - top) / z * scale;
    }
    (*grad_out)[label] -= scale;
  }
  return ce;
}

Eval evaluate_split(const StackConfig& cfg, const std::vector<CellParams>& params,
                    const std::vector<Sample>& samples, bool run_first) {
  Eval eval;
  if (samples.empty()) return eval;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (const Sample& sample : samples) {
    StackRun run = stack_forward(cfg, params, sample.inputs);
    double ce = 0.0;
    for (const Vec& logits : run.outputs) {
      ce += step_cross_entropy(logits, sample.label, 0.0, nullptr);
    }
    ce /= double(run.outputs.size());
    if (!std::isfinite(ce)) {
      eval.finite = false;
      return eval;
    }
    loss_sum += ce;
    correct += mode_accuracy(run.outputs, sample.label, run_first) ? 1 : 0;
  }
  eval.loss = loss_sum / double(samples.size());
  eval.accuracy = double(correct) / double(samples.size());
  eval.perplexity = std::exp(eval.loss);
  eval.finite = std::isfinite(eval.perplexity);
  return eval;
}

void accumulate(StackGradients& total, const StackGradients& part) {
  for (std::size_t l = 0; l < total.layers.size(); ++l) {
    for (std::size_t i = 0; i < total.layers[l].tensors.size(); ++i) {
      Vec& into = total.layers[l].tensors[i].value.data();
      const Vec& from = part.layers[l].tensors[i].value.data();
      for (std::size_t k = 0; k < into.size(); ++k) into[k] += from[k];
    }
  }
  if (total.has_readout) {
    Vec& into = total.readout.data();
    const Vec& from = part.readout.data();
    for (std::size_t k = 0; k < into.size(); ++k) into[k] += from[k];
  }
}

bool train_epoch(StackConfig& cfg, std::vector<CellParams>& params, AdaBelief& opt,
                 const std::vector<Sample>& train, std::size_t batch_size,
                 RandomSource& shuffle_rng) {
  std::vector<std::size_t> order = shuffle_rng.permutation(train.size());
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    StackGradients total;
    total.layers.reserve(params.size());
    for (const CellParams& p : params) total.layers.push_back(zeros_like(p));
    total.has_readout = cfg.readout.has_value();
    if (total.has_readout) total.readout = Matrix(cfg.readout->rows(), cfg.readout->cols());

    for (std::size_t i = 0; i < count; ++i) {
      const Sample& sample = train[order[start + i]];
      StackRun run = stack_forward(cfg, params, sample.inputs);
      const double scale = 1.0 / (double(run.outputs.size()) * double(count));
      std::vector<Vec> output_grads(run.outputs.size());
      double ce = 0.0;
      for (std::size_t t = 0; t < run.outputs.size(); ++t) {
        ce += step_cross_entropy(run.outputs[t], sample.label, scale, &output_grads[t]);
      }
      if (!std::isfinite(ce)) return false;
      accumulate(total, reverse_gradient(run, output_grads));
    }

    opt.step(params, total.layers);
    if (cfg.readout.has_value()) opt.step_readout(*cfg.readout, total.readout);
  }
  return true;
}

SeedResult run_seed(const RunConfig& config, std::uint64_t seed) {
  SeedResult result;
  result.seed = seed;

  RandomSource root(seed);
  RandomSource init_rng = root.child(0);
  RandomSource data_rng = root.child(1);
  Dataset data = synthetic_generate(config.task, data_rng);

  StackConfig cfg = config.stack;
  std::vector<CellParams> params = init_stack_params(cfg, init_rng);
  if (!cfg.readout.has_value()) {
    RandomSource readout_rng = root.child(2);
    cfg.readout = init_matrix(InitScheme::GlorotUniform, config.task.classes, cfg.output_size(),
                              readout_rng);
  }
  if (config.pretrain_enabled) {
    RandomSource pre_rng = root.child(3);
    PretrainReport report = pretrain_run(cfg, params, config.pretrain, pre_rng);
    params = std::move(report.params);
  }

  RandomSource shuffle_rng = root.child(4);
  AdaBelief opt;
  opt.learning_rate = config.learning_rate;
  opt.weight_decay = config.weight_decay;

  auto record = [&result](std::size_t epoch, const std::string& split, const Eval& eval) {
    result.history.push_back({epoch, split, eval.loss, eval.accuracy, eval.perplexity});
  };

  if (config.max_epochs == 0) {
    Eval train_eval = evaluate_split(cfg, params, data.train, config.mode_run_first);
    Eval val_eval = evaluate_split(cfg, params, data.val, config.mode_run_first);
    Eval test_eval = evaluate_split(cfg, params, data.test, config.mode_run_first);
    result.failed = !(train_eval.finite && val_eval.finite && test_eval.finite);
    if (!result.failed) {
      record(0, "train", train_eval);
      record(0, "val", val_eval);
      record(0, "test", test_eval);
      result.test_loss = test_eval.loss;
      result.test_accuracy = test_eval.accuracy;
      result.test_perplexity = test_eval.perplexity;
    }
    return result;
  }

  double best_val = std::numeric_limits<double>::infinity();
  std::vector<CellParams> best_params = params;
  Matrix best_readout = *cfg.readout;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (!train_epoch(cfg, params, opt, data.train, config.batch_size, shuffle_rng)) {
      result.failed = true;
      break;
    }
    Eval train_eval = evaluate_split(cfg, params, data.train, config.mode_run_first);
    Eval val_eval = evaluate_split(cfg, params, data.val, config.mode_run_first);
    if (!train_eval.finite || !val_eval.finite) {
      result.failed = true;
      break;
    }
    record(epoch, "train", train_eval);
    record(epoch, "val", val_eval);
    if (val_eval.loss < best_val) {
      best_val = val_eval.loss;
      best_params = params;
      best_readout = *cfg.readout;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }

  if (!result.failed) {
    params = std::move(best_params);
    cfg.readout = std::move(best_readout);
    Eval test_eval = evaluate_split(cfg, params, data.test, config.mode_run_first);
    if (!test_eval.finite) {
      result.failed = true;
    } else {
      record(result.best_epoch, "test", test_eval);
      result.test_loss = test_eval.loss;
      result.test_accuracy = test_eval.accuracy;
      result.test_perplexity = test_eval.perplexity;
    }
  }
  return result;
}

}  // namespace

TrainSummary train_run(const RunConfig& config) {
  config.validate();
  if (!config.output_dir.empty()) {
    std::filesystem::create_directories(config.output_dir);
  }

  // Independent jobs: every seed owns its RNG tree, data, and output file.
  std::vector<std::future<SeedResult>> jobs;
  jobs.reserve(config.seeds.size());
  for (std::uint64_t seed : config.seeds) {
    jobs.push_back(std::async(std::launch::async, [&config, seed] {
      SeedResult result = run_seed(config, seed);
      if (!config.output_dir.empty()) {
        write_metrics_csv(
            config.output_dir + "/seed_" + std::to_string(seed) + "_metrics.csv",
            result.history);
      }
      return result;
    }));
  }

  TrainSummary summary;
  summary.seeds.reserve(jobs.size());
  for (auto& job : jobs) summary.seeds.push_back(job.get());

  std::vector<double> accuracies, losses;
  for (const SeedResult& seed : summary.seeds) {
    if (seed.failed) {
      ++summary.failed_seeds;
      continue;
    }
    accuracies.push_back(seed.test_accuracy);
    losses.push_back(seed.test_loss);
  }
  auto mean_of = [](const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return xs.empty() ? 0.0 : sum / double(xs.size());
  };
  auto std_of = [&](const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / double(xs.size() - 1));
  };
  summary.mean_test_accuracy = mean_of(accuracies);
  summary.std_test_accuracy = std_of(accuracies, summary.mean_test_accuracy);
  summary.mean_test_loss = mean_of(losses);
  summary.std_test_loss = std_of(losses, summary.mean_test_loss);

  if (!config.output_dir.empty()) {
    write_aggregate_json(config.output_dir + "/aggregate.json", summary);
  }
  return summary;
}

}  // namespace lsc
