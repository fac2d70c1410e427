#include "lsc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lsc/eigen.hpp"
#include "lsc/errors.hpp"

namespace lsc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// C(n, k) through lgamma; exact to ~1e-14 relative, which is all the
// template fits need.
double binom_double(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  if (k == 0 || k == n) return 1.0;
  return std::exp(std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
                  std::lgamma(double(n - k) + 1.0));
}

void fill_norms(const Matrix& m, double& rho, std::array<double, 3>& norms) {
  rho = spectral_radius(m.leading_square());
  norms[0] = induced_norm(m, 1);
  norms[1] = induced_norm(m, 2);
  norms[2] = induced_norm(m, 0);
}

// Row-vector u times M, i.e. M^T u.
void row_times(const Matrix& m, const Vec& u, Vec& out) { m.apply_transpose_into(u, out); }

}  // namespace

const TransitionJacobians& JacobianGrid::at(std::size_t t, std::size_t l) const {
  if (t < 1 || t > time_steps || l < 1 || l > depth) {
    throw RangeError("jacobian grid index (t=" + std::to_string(t) + ", l=" + std::to_string(l) +
                     ") outside 1.." + std::to_string(time_steps) + " x 1.." +
                     std::to_string(depth));
  }
  return entries[(t - 1) * depth + (l - 1)];
}

JacobianGrid transition_jacobians(const StackRun& run) {
  const std::size_t T = run.time_steps();
  const std::size_t L = run.depth();
  JacobianGrid grid;
  grid.time_steps = T;
  grid.depth = L;
  grid.entries.reserve(T * L);
  for (std::size_t t = 1; t <= T; ++t) {
    for (std::size_t l = 1; l <= L; ++l) {
      const CellSpec& spec = run.config.layers[l - 1];
      const CellParams& params = run.params[l - 1];
      const CellState& prev = run.states[t - 1][l - 1];
      Vec below = run.input_to(t, l);

      TransitionJacobians entry;
      entry.t = t;
      entry.l = l;
      entry.time_jac = jac_time(spec, params, prev, below);
      if (l == 1) {
        entry.depth_jac = jac_input(spec, params, prev, below);
      } else {
        entry.depth_jac = jac_depth(spec, params, prev, below, run.config.layers[l - 2],
                                    run.states[t - 1][l - 2]);
      }
      fill_norms(entry.time_jac, entry.rho_time, entry.a_time);
      fill_norms(entry.depth_jac, entry.rho_depth, entry.a_depth);
      grid.entries.push_back(std::move(entry));
    }
  }
  return grid;
}

namespace {

// Column of partial products d state(anchor, L) / d state(t_cur, k) for
// k = l_min..L, swept from t_cur = anchor down to t_stop. on_column is
// called at every t_cur (anchor included) with the current column.
template <typename Fn>
void sweep_grid(const StackRun& run, const JacobianGrid& grid, std::size_t anchor,
                std::size_t l_min, std::size_t t_stop, Fn&& on_column) {
  const std::size_t L = run.depth();
  const std::size_t n_top = run.config.layers[L - 1].state_size();
  std::vector<Matrix> col(L + 1);
  for (std::size_t k = l_min; k <= L; ++k) {
    col[k] = (k == L) ? Matrix::identity(n_top)
                      : Matrix(n_top, run.config.layers[k - 1].state_size());
  }
  on_column(anchor, col);
  std::vector<Matrix> next(L + 1);
  for (std::size_t t_cur = anchor; t_cur > t_stop; --t_cur) {
    for (std::size_t k = l_min; k <= L; ++k) {
      next[k] = col[k] * grid.at(t_cur, k).time_jac;
      if (k < L) next[k] += col[k + 1] * grid.at(t_cur, k + 1).depth_jac;
    }
    std::swap(col, next);
    on_column(t_cur - 1, col);
  }
}

void check_grid_point(const StackRun& run, std::size_t t_prime, std::size_t l) {
  if (l < 1 || l > run.depth()) {
    throw RangeError("layer " + std::to_string(l) + " outside 1.." + std::to_string(run.depth()));
  }
  if (t_prime > run.time_steps()) {
    throw RangeError("origin step " + std::to_string(t_prime) + " exceeds " +
                     std::to_string(run.time_steps()));
  }
}

}  // namespace

Matrix grid_jacobian(const StackRun& run, const JacobianGrid& grid, std::size_t t_prime,
                     std::size_t l) {
  check_grid_point(run, t_prime, l);
  Matrix result;
  sweep_grid(run, grid, run.time_steps(), l, t_prime,
             [&](std::size_t t_cur, const std::vector<Matrix>& col) {
               if (t_cur == t_prime) result = col[l];
             });
  return result;
}

Matrix brute_force_paths(const StackRun& run, const JacobianGrid& grid, std::size_t t_prime,
                         std::size_t l) {
  check_grid_point(run, t_prime, l);
  const std::size_t T = run.time_steps();
  const std::size_t L = run.depth();
  const std::size_t dt = T - t_prime;
  const std::size_t dl = L - l;
  const std::size_t n_top = run.config.layers[L - 1].state_size();
  const std::size_t n_l = run.config.layers[l - 1].state_size();

  Matrix total(n_top, n_l);
  if (dl > dt) return total;
  if (binom_double(dt, dl) > 1e6) {
    throw SizeError("path enumeration would visit " + std::to_string(binom_double(dt, dl)) +
                    " chains; limit is 1e6");
  }
  if (dt == 0) return Matrix::identity(n_top);

  // Depth-first over monotone staircase chains from (T, L) down to
  // (t_prime, l), right-multiplying one transition factor per step.
  auto rec = [&](auto&& self, std::size_t t_cur, std::size_t l_cur, const Matrix& prod) -> void {
    const std::size_t remaining = t_cur - t_prime;
    const std::size_t need = l_cur - l;
    if (need > remaining) return;
    if (remaining == 0) {
      total += prod;
      return;
    }
    if (need < remaining) {
      self(self, t_cur - 1, l_cur, prod * grid.at(t_cur, l_cur).time_jac);
    }
    if (need >= 1) {
      self(self, t_cur - 1, l_cur - 1, prod * grid.at(t_cur, l_cur).depth_jac);
    }
  };
  rec(rec, T, L, Matrix::identity(n_top));
  return total;
}

BoundCurve norm_curve(const StackRun& run, int p) {
  const std::size_t T = run.time_steps();
  const std::size_t L = run.depth();
  if (T < 1) throw RangeError("norm curve needs at least one step");
  JacobianGrid grid = transition_jacobians(run);

  BoundCurve curve;
  curve.jac_norms.assign(T + 1, 0.0);
  curve.carrier.assign(T + 1, 0.0);

  // anchor t = 0 contributes only to origin t' = 0.
  curve.carrier[0] = (L == 1) ? 1.0 : 0.0;
  for (std::size_t anchor = 1; anchor <= T; ++anchor) {
    sweep_grid(run, grid, anchor, 1, 0, [&](std::size_t t_cur, const std::vector<Matrix>& col) {
      double value = induced_norm(col[1], p);
      curve.carrier[t_cur] += value;
      if (anchor == T) curve.jac_norms[t_cur] = value;
    });
  }
  for (double& v : curve.carrier) v /= double(T);

  // Binomial-template fit: shape(t') = C(dt + 1, L), dt = T - t'.
  double log_sum = 0.0;
  std::size_t log_n = 0;
  for (std::size_t tp = 0; tp <= T; ++tp) {
    double shape = binom_double(T - tp + 1, L);
    if (shape > 0.0 && curve.carrier[tp] > 0.0) {
      log_sum += std::log(curve.carrier[tp] / shape);
      ++log_n;
    }
  }
  curve.c1 = log_n ? std::exp(log_sum / double(log_n)) : 0.0;
  curve.c1_max_rel_dev = log_n ? 0.0 : kInf;
  for (std::size_t tp = 0; tp <= T && log_n; ++tp) {
    double shape = binom_double(T - tp + 1, L);
    if (shape <= 0.0) continue;
    if (curve.carrier[tp] <= 0.0) {
      curve.c1_max_rel_dev = kInf;
      break;
    }
    curve.c1_max_rel_dev =
        std::max(curve.c1_max_rel_dev, std::abs(curve.carrier[tp] / (curve.c1 * shape) - 1.0));
  }

  // Constant-template fit over the oldest quarter of origins.
  const std::size_t window = T / 4;
  double mean = 0.0;
  for (std::size_t tp = 0; tp <= window; ++tp) mean += curve.carrier[tp];
  mean /= double(window + 1);
  curve.c2 = mean;
  curve.c2_max_rel_dev = 0.0;
  for (std::size_t tp = 0; tp <= window; ++tp) {
    if (mean <= 0.0) {
      curve.c2_max_rel_dev = kInf;
      break;
    }
    curve.c2_max_rel_dev =
        std::max(curve.c2_max_rel_dev, std::abs(curve.carrier[tp] / mean - 1.0));
  }
  curve.kind = (curve.c1_max_rel_dev <= curve.c2_max_rel_dev) ? "binomial" : "constant";
  return curve;
}

CellParams update_decomposition(const StackRun& run, const std::vector<Vec>& output_grads,
                                std::size_t layer) {
  const std::size_t T = run.time_steps();
  const std::size_t L = run.depth();
  if (layer < 1 || layer > L) {
    throw RangeError("layer " + std::to_string(layer) + " outside 1.." + std::to_string(L));
  }
  if (output_grads.size() != T) {
    throw DimensionError("need one output gradient per step: got " +
                         std::to_string(output_grads.size()) + ", steps " + std::to_string(T));
  }
  JacobianGrid grid = transition_jacobians(run);
  const CellSpec& spec = run.config.layers[layer - 1];
  const CellParams& params = run.params[layer - 1];
  CellParams grad = zeros_like(params);

  const std::size_t lag = L - layer;  // steps before u reaches `layer`
  std::vector<Vec> u(L + 1), u_next(L + 1), scratch(L + 1);
  for (std::size_t anchor = 1; anchor <= T; ++anchor) {
    const Vec& g = output_grads[anchor - 1];
    if (g.size() != run.config.output_size()) {
      throw DimensionError("output gradient width mismatch at step " + std::to_string(anchor));
    }
    Vec features = g;
    if (run.config.readout.has_value()) features = run.config.readout->apply_transpose(g);
    Matrix out_jac = output_jacobian(run.config.layers[L - 1], run.states[anchor][L - 1]);
    for (std::size_t k = layer; k <= L; ++k) {
      u[k].assign(run.config.layers[k - 1].state_size(), 0.0);
    }
    out_jac.apply_transpose_into(features, u[L]);

    for (std::size_t t = anchor; t >= 1; --t) {
      if (anchor - t >= lag) {
        cell_param_vjp(spec, params, run.states[t - 1][layer - 1], run.input_to(t, layer),
                       u[layer], grad);
      }
      if (t == 1) break;
      for (std::size_t k = layer; k <= L; ++k) {
        row_times(grid.at(t, k).time_jac, u[k], u_next[k]);
        if (k < L) {
          row_times(grid.at(t, k + 1).depth_jac, u[k + 1], scratch[k]);
          for (std::size_t i = 0; i < u_next[k].size(); ++i) u_next[k][i] += scratch[k][i];
        }
      }
      std::swap(u, u_next);
    }
  }
  return grad;
}

std::map<std::string, double> update_variance(const std::vector<StackRun>& batch,
                                              const std::vector<std::vector<Vec>>& output_grads,
                                              std::size_t layer) {
  if (batch.size() < 2) {
    throw StatisticsError("variance needs at least 2 samples, got " +
                          std::to_string(batch.size()));
  }
  if (output_grads.size() != batch.size()) {
    throw DimensionError("one gradient sequence per run required");
  }
  std::vector<CellParams> updates;
  updates.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    updates.push_back(update_decomposition(batch[b], output_grads[b], layer));
  }
  std::map<std::string, double> out;
  const CellParams& head = updates.front();
  const double n = double(updates.size());
  for (std::size_t ti = 0; ti < head.tensors.size(); ++ti) {
    const Matrix& first = head.tensors[ti].value;
    Matrix mean(first.rows(), first.cols());
    for (const CellParams& up : updates) {
      const Matrix& v = up.tensors[ti].value;
      if (v.rows() != first.rows() || v.cols() != first.cols()) {
        throw DimensionError("update tensor shapes differ across the batch");
      }
      mean += v;
    }
    mean = mean * (1.0 / n);
    double acc = 0.0;
    for (const CellParams& up : updates) {
      const Matrix& v = up.tensors[ti].value;
      for (std::size_t i = 0; i < v.rows(); ++i) {
        for (std::size_t j = 0; j < v.cols(); ++j) {
          double d = v(i, j) - mean(i, j);
          acc += d * d;
        }
      }
    }
    double var = acc / ((n - 1.0) * double(first.rows() * first.cols()));
    out[head.tensors[ti].name] = var;
  }
  return out;
}

}  // namespace lsc
