#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lsc/pretrain.hpp"
#include "lsc/stack.hpp"
#include "lsc/tasks.hpp"

namespace lsc {

struct RunConfig {
  TaskSpec task;
  StackConfig stack;  // a missing readout is initialized per seed (classes x output width)
  double learning_rate = 3.14e-3;
  double weight_decay = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::size_t early_stop_patience = 10;
  std::vector<std::uint64_t> seeds;
  bool pretrain_enabled = false;
  PretrainConfig pretrain;
  bool mode_run_first = false;  // alternative mode-accuracy tie order
  std::string output_dir;       // empty: keep results in memory only

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::string split;  // train | val | test
  double loss = 0.0;
  double accuracy = 0.0;
  double perplexity = 1.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool failed = false;  // the loss went non-finite; metrics stop at that point
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> history;  // train/val per epoch, then one test row
  double test_loss = 0.0;
  double test_accuracy = 0.0;
  double test_perplexity = 1.0;
};

struct TrainSummary {
  std::vector<SeedResult> seeds;
  std::size_t failed_seeds = 0;
  // Aggregates over the seeds that finished (mean and sample std).
  double mean_test_accuracy = 0.0;
  double std_test_accuracy = 0.0;
  double mean_test_loss = 0.0;
  double std_test_loss = 0.0;
};

// Runs every seed as an independent job (dataset, init, optional radius
// pre-training, minibatch cross-entropy training with early stopping on
// validation loss) and aggregates test metrics over the seeds that finished.
// With an output_dir set, writes seed_<seed>_metrics.csv per seed and
// aggregate.json once all jobs are done.
TrainSummary train_run(const RunConfig& config);

}  // namespace lsc
