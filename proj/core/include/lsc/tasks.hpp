#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lsc/matrix.hpp"
#include "lsc/rng.hpp"

namespace lsc {

enum class TaskKind { Rowsum, DelayedRecall, SpikeLatencyImages };

TaskKind task_kind_from_string(const std::string& name);
std::string to_string(TaskKind kind);

struct TaskSpec {
  TaskKind kind = TaskKind::Rowsum;
  std::size_t time_steps = 10;
  std::size_t channels = 1;  // delayed recall needs classes + 1 (symbols + cue)
  std::size_t classes = 4;
  std::size_t train_samples = 256;
  std::size_t val_samples = 64;
  std::size_t test_samples = 128;
  double theta = 0.2;      // latency-encoding threshold
  double tau_eff = 50.0;   // latency-encoding time constant
  bool repeat_inputs = false;  // present every frame twice
  std::string images_path;     // IDX files for the image task
  std::string labels_path;

  // Sequence length after the optional frame repetition.
  std::size_t sequence_length() const { return repeat_inputs ? 2 * time_steps : time_steps; }
  void validate() const;
};

struct Sample {
  std::vector<Vec> inputs;  // sequence_length x channels
  std::size_t label = 0;
};

struct Dataset {
  std::vector<Sample> train, val, test;
};

// Latency code: brighter values spike earlier. Returns the spike step
// round(tau_eff * ln(x / (x - theta))) clamped to [0, T-1], or nothing for
// x <= theta (no spike).
std::optional<std::size_t> spike_latency_encode(double x, double theta, double tau_eff,
                                                std::size_t T);

Dataset synthetic_generate(const TaskSpec& spec, RandomSource& rng);

// Loads the image task from IDX files and latency-encodes each pixel into a
// spike raster of spec.time_steps steps (channels = pixel count).
Dataset image_latency_generate(const TaskSpec& spec, RandomSource& rng);

// Predicted class: most frequent per-step argmax; frequency ties broken by
// the longest consecutive run, remaining ties by the lowest class index.
// run_first swaps the first two criteria.
std::size_t mode_prediction(const std::vector<Vec>& per_step_logits, bool run_first = false);
bool mode_accuracy(const std::vector<Vec>& per_step_logits, std::size_t label,
                   bool run_first = false);

}  // namespace lsc
