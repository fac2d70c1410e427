#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lsc/cells.hpp"
#include "lsc/matrix.hpp"
#include "lsc/rng.hpp"

namespace lsc {

// An L-layer stack. Layer l at step t consumes layer l-1's output from step
// t-1 (causal indexing); layer 1 consumes the task input, so input row t-1
// drives the state update at step t. Without a readout matrix the last
// layer's output is emitted unchanged.
struct StackConfig {
  std::vector<CellSpec> layers;
  std::optional<Matrix> readout;  // n_classes x width(L)

  std::size_t depth() const { return layers.size(); }
  std::size_t channels() const { return layers.empty() ? 0 : layers.front().input_width; }
  std::size_t output_size() const;
  // Throws ConfigurationError when adjacent widths do not chain or the
  // readout shape is inconsistent.
  void validate() const;
};

std::vector<CellParams> init_stack_params(const StackConfig& config, RandomSource& rng);

// The recorded forward trajectory: every state for t = 0..T (t = 0 holds the
// initial states), the inputs that drove it, and the per-step outputs.
struct StackRun {
  StackConfig config;
  std::vector<CellParams> params;
  std::vector<std::vector<CellState>> states;  // (T+1) x L
  std::vector<Vec> inputs;                     // T x channels
  std::vector<Vec> outputs;                    // T x output_size

  std::size_t time_steps() const { return inputs.size(); }
  std::size_t depth() const { return config.layers.size(); }
  // The vector that fed layer l (1-based) at step t (1..T): the task input
  // for l = 1, otherwise the output of layer l-1 at t-1.
  Vec input_to(std::size_t t, std::size_t l) const;
};

StackRun stack_forward(const StackConfig& config, const std::vector<CellParams>& params,
                       const std::vector<Vec>& inputs);

}  // namespace lsc
