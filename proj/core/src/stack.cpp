#include "lsc/stack.hpp"

#include <string>

#include "lsc/errors.hpp"

namespace lsc {

std::size_t StackConfig::output_size() const {
  if (readout.has_value()) return readout->rows();
  return layers.empty() ? 0 : layers.back().output_size();
}

void StackConfig::validate() const {
  if (layers.empty()) throw ConfigurationError("stack needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (l > 0 && layers[l].input_width != layers[l - 1].output_size()) {
      throw ConfigurationError("layer " + std::to_string(l + 1) + " input width " +
                               std::to_string(layers[l].input_width) + " != layer " +
                               std::to_string(l) + " output size " +
                               std::to_string(layers[l - 1].output_size()));
    }
  }
  if (readout.has_value()) {
    if (readout->cols() != layers.back().output_size()) {
      throw ConfigurationError("readout expects " + std::to_string(readout->cols()) +
                               " features, last layer emits " +
                               std::to_string(layers.back().output_size()));
    }
    if (readout->rows() == 0) throw ConfigurationError("readout has zero rows");
  }
}

std::vector<CellParams> init_stack_params(const StackConfig& config, RandomSource& rng) {
  config.validate();
  std::vector<CellParams> params;
  params.reserve(config.layers.size());
  for (const CellSpec& spec : config.layers) params.push_back(init_cell_params(spec, rng));
  return params;
}

Vec StackRun::input_to(std::size_t t, std::size_t l) const {
  if (t < 1 || t > time_steps() || l < 1 || l > depth()) {
    throw RangeError("input_to: step or layer out of range");
  }
  if (l == 1) return inputs[t - 1];
  return cell_output(config.layers[l - 2], states[t - 1][l - 2]);
}

StackRun stack_forward(const StackConfig& config, const std::vector<CellParams>& params,
                       const std::vector<Vec>& inputs) {
  config.validate();
  if (params.size() != config.layers.size()) {
    throw ConfigurationError("parameter count does not match layer count");
  }
  for (const Vec& row : inputs) {
    if (row.size() != config.channels()) {
      throw DimensionError("input row width " + std::to_string(row.size()) + " != " +
                           std::to_string(config.channels()));
    }
  }

  StackRun run;
  run.config = config;
  run.params = params;
  run.inputs = inputs;
  const std::size_t T = inputs.size();
  const std::size_t L = config.layers.size();

  run.states.resize(T + 1);
  run.states[0].reserve(L);
  for (const CellSpec& spec : config.layers) run.states[0].push_back(initial_state(spec));

  run.outputs.reserve(T);
  for (std::size_t t = 1; t <= T; ++t) {
    run.states[t].reserve(L);
    for (std::size_t l = 1; l <= L; ++l) {
      Vec below = (l == 1) ? inputs[t - 1]
                           : cell_output(config.layers[l - 2], run.states[t - 1][l - 2]);
      run.states[t].push_back(
          cell_forward(config.layers[l - 1], params[l - 1], run.states[t - 1][l - 1], below));
    }
    Vec out = cell_output(config.layers[L - 1], run.states[t][L - 1]);
    if (config.readout.has_value()) out = config.readout->apply(out);
    run.outputs.push_back(std::move(out));
  }
  return run;
}

}  // namespace lsc
