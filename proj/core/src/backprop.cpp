#include "lsc/backprop.hpp"

#include <string>

#include "lsc/errors.hpp"

namespace lsc {

StackGradients reverse_gradient(const StackRun& run, const std::vector<Vec>& output_grads) {
  const std::size_t T = run.time_steps();
  const std::size_t L = run.depth();
  if (output_grads.size() != T) {
    throw DimensionError("need one output gradient per step: got " +
                         std::to_string(output_grads.size()) + ", steps " + std::to_string(T));
  }

  StackGradients grads;
  grads.layers.reserve(L);
  for (const CellParams& p : run.params) grads.layers.push_back(zeros_like(p));
  grads.has_readout = run.config.readout.has_value();
  const std::size_t n_out = run.config.layers[L - 1].output_size();
  if (grads.has_readout) grads.readout = Matrix(run.config.readout->rows(), n_out);

  std::vector<Vec> adj(L), adj_prev(L), scratch(L);
  for (std::size_t l = 0; l < L; ++l) {
    adj[l].assign(run.config.layers[l].state_size(), 0.0);
  }

  for (std::size_t t = T; t >= 1; --t) {
    const Vec& g = output_grads[t - 1];
    if (g.size() != run.config.output_size()) {
      throw DimensionError("output gradient width mismatch at step " + std::to_string(t));
    }
    Vec top_out = cell_output(run.config.layers[L - 1], run.states[t][L - 1]);
    Vec features = g;
    if (grads.has_readout) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t j = 0; j < n_out; ++j) grads.readout(i, j) += g[i] * top_out[j];
      }
      features = run.config.readout->apply_transpose(g);
    }
    Matrix out_jac = output_jacobian(run.config.layers[L - 1], run.states[t][L - 1]);
    out_jac.apply_transpose_into(features, scratch[L - 1]);
    for (std::size_t i = 0; i < adj[L - 1].size(); ++i) adj[L - 1][i] += scratch[L - 1][i];

    for (std::size_t l = 0; l < L; ++l) {
      adj_prev[l].assign(run.config.layers[l].state_size(), 0.0);
    }
    for (std::size_t l = L; l >= 1; --l) {
      const CellSpec& spec = run.config.layers[l - 1];
      const CellParams& params = run.params[l - 1];
      const CellState& prev = run.states[t - 1][l - 1];
      Vec below = run.input_to(t, l);
      cell_param_vjp(spec, params, prev, below, adj[l - 1], grads.layers[l - 1]);

      jac_time(spec, params, prev, below).apply_transpose_into(adj[l - 1], scratch[l - 1]);
      for (std::size_t i = 0; i < scratch[l - 1].size(); ++i) {
        adj_prev[l - 1][i] += scratch[l - 1][i];
      }
      if (l >= 2) {
        Matrix depth = jac_depth(spec, params, prev, below, run.config.layers[l - 2],
                                 run.states[t - 1][l - 2]);
        depth.apply_transpose_into(adj[l - 1], scratch[l - 2]);
        for (std::size_t i = 0; i < scratch[l - 2].size(); ++i) {
          adj_prev[l - 2][i] += scratch[l - 2][i];
        }
      }
    }
    std::swap(adj, adj_prev);
  }
  return grads;
}

}  // namespace lsc
