#include "lsc/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lsc/eigen.hpp"
#include "lsc/errors.hpp"

namespace lsc {
namespace {

struct RadiusCollection {
  std::size_t batch = 0, T = 0, L = 0;
  std::vector<double> time_radii, depth_radii;  // all (b, t, l), b-major
  std::vector<double> per_k;                    // batch means at (t, l, direction)
  std::vector<double> time_layer, depth_layer;  // per-layer means over (b, t)

  double overall_mean() const {
    double s = 0.0;
    for (double v : time_radii) s += v;
    for (double v : depth_radii) s += v;
    return s / double(time_radii.size() + depth_radii.size());
  }
  double spread_over_k() const {
    double m = 0.0;
    for (double v : per_k) m += v;
    m /= double(per_k.size());
    double acc = 0.0;
    for (double v : per_k) acc += (v - m) * (v - m);
    return std::sqrt(acc / double(per_k.size()));
  }
};

void check_radius(double rho, std::size_t sample, std::size_t t, std::size_t l,
                  const char* direction) {
  if (!std::isfinite(rho)) {
    throw NumericalError("non-finite transition radius (sample " + std::to_string(sample) +
                             ", t=" + std::to_string(t) + ", l=" + std::to_string(l) +
                             ", direction=" + direction + ")",
                         0);
  }
}

RadiusCollection collect_radii(const StackConfig& stack, const std::vector<CellParams>& params,
                               const std::vector<std::vector<Vec>>& inputs) {
  RadiusCollection col;
  col.batch = inputs.size();
  col.T = inputs.front().size();
  col.L = stack.depth();
  col.time_radii.reserve(col.batch * col.T * col.L);
  col.depth_radii.reserve(col.batch * col.T * col.L);
  col.per_k.assign(col.T * col.L * 2, 0.0);
  col.time_layer.assign(col.L, 0.0);
  col.depth_layer.assign(col.L, 0.0);

  for (std::size_t b = 0; b < col.batch; ++b) {
    StackRun run = stack_forward(stack, params, inputs[b]);
    for (std::size_t t = 1; t <= col.T; ++t) {
      for (std::size_t l = 1; l <= col.L; ++l) {
        const CellSpec& spec = stack.layers[l - 1];
        const CellState& prev = run.states[t - 1][l - 1];
        Vec below = run.input_to(t, l);
        double rho_t = spectral_radius(jac_time(spec, params[l - 1], prev, below).leading_square());
        Matrix depth =
            (l == 1) ? jac_input(spec, params[0], prev, below)
                     : jac_depth(spec, params[l - 1], prev, below, stack.layers[l - 2],
                                 run.states[t - 1][l - 2]);
        double rho_d = spectral_radius(depth.leading_square());
        check_radius(rho_t, b, t, l, "time");
        check_radius(rho_d, b, t, l, "depth");
        col.time_radii.push_back(rho_t);
        col.depth_radii.push_back(rho_d);
        const std::size_t k = ((t - 1) * col.L + (l - 1)) * 2;
        col.per_k[k] += rho_t;
        col.per_k[k + 1] += rho_d;
        col.time_layer[l - 1] += rho_t;
        col.depth_layer[l - 1] += rho_d;
      }
    }
  }
  for (double& v : col.per_k) v /= double(col.batch);
  for (double& v : col.time_layer) v /= double(col.batch * col.T);
  for (double& v : col.depth_layer) v /= double(col.batch * col.T);
  return col;
}

std::vector<std::vector<Vec>> draw_batch(const StackConfig& stack, std::size_t batch,
                                         std::size_t time_steps, RandomSource& rng) {
  std::vector<std::vector<Vec>> inputs(batch);
  for (auto& sample : inputs) {
    sample.resize(time_steps);
    for (auto& row : sample) {
      row.resize(stack.channels());
      for (double& v : row) v = rng.normal();
    }
  }
  return inputs;
}

}  // namespace

GradMode grad_mode_from_string(const std::string& name) {
  if (name == "kappa_only") return GradMode::KappaOnly;
  if (name == "finite_difference") return GradMode::FiniteDifference;
  if (name == "eigen_adjoint") return GradMode::EigenAdjoint;
  throw ConfigurationError("unknown gradient mode '" + name + "'");
}

std::string to_string(GradMode mode) {
  switch (mode) {
    case GradMode::KappaOnly: return "kappa_only";
    case GradMode::FiniteDifference: return "finite_difference";
    case GradMode::EigenAdjoint: return "eigen_adjoint";
  }
  return "kappa_only";
}

GradMode default_grad_mode(CellType cell, std::size_t width) {
  switch (cell) {
    case CellType::PascalRnn:
    case CellType::SimpleRnn: return GradMode::EigenAdjoint;
    case CellType::Gru:
    case CellType::Lstm: return width <= 16 ? GradMode::FiniteDifference : GradMode::KappaOnly;
    case CellType::Alif: return GradMode::KappaOnly;
  }
  return GradMode::KappaOnly;
}

void PretrainConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigurationError("tolerance must be positive");
  const double mean_target = weighted ? 0.5 : rho_target;
  if (!(epsilon < mean_target)) {
    throw ConfigurationError("tolerance must stay below the target radius");
  }
  if (!(kappa_low < 1.0 && 1.0 < kappa_high)) {
    throw ConfigurationError("multiplier clip range must bracket 1");
  }
  if (max_steps < 1) throw ConfigurationError("need at least one step");
  if (batch < 1) throw ConfigurationError("need at least one sample per batch");
  if (time_steps < 1) throw ConfigurationError("need at least one time step");
  if (ema_window < 1) throw ConfigurationError("moving-average window must be >= 1");
  if (!(spread_threshold > 0.0)) throw ConfigurationError("spread threshold must be positive");
}

double radius_loss(const std::vector<double>& radii, double rho_target) {
  if (radii.empty()) throw SizeError("radius list is empty");
  double acc = 0.0;
  for (double r : radii) acc += (r - rho_target) * (r - rho_target);
  return acc;
}

double kappa(double rho, double rho_target, bool* degenerate, double low, double high) {
  if (rho <= 1e-12) {
    if (degenerate) *degenerate = true;
    return high;
  }
  return std::clamp(rho_target / rho, low, high);
}

CellParams apply_kappa(const CellParams& params, double kappa_time, double kappa_depth) {
  CellParams out = params;
  for (ParamTensor& tensor : out.tensors) {
    double factor = 1.0;
    switch (tensor.group) {
      case KappaGroup::None: continue;
      case KappaGroup::Recurrent: factor = kappa_time; break;
      case KappaGroup::Input: factor = kappa_depth; break;
      case KappaGroup::Geometric: factor = std::sqrt(kappa_time * kappa_depth); break;
    }
    Matrix& m = tensor.value;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j < m.cols(); ++j) {
        m(i, j) = std::max(m(i, j) * factor, tensor.floor);
      }
    }
  }
  return out;
}

CellParams shuffle_tensors(const CellParams& params, RandomSource& rng) {
  CellParams out = params;
  for (ParamTensor& tensor : out.tensors) {
    Matrix& m = tensor.value;
    const std::size_t n = m.rows() * m.cols();
    // Fisher-Yates over the flattened entries.
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = rng.next_below(i);
      const std::size_t a_r = (i - 1) / m.cols(), a_c = (i - 1) % m.cols();
      const std::size_t b_r = j / m.cols(), b_c = j % m.cols();
      std::swap(m(a_r, a_c), m(b_r, b_c));
    }
  }
  return out;
}

std::pair<double, double> weighted_targets(std::size_t T, std::size_t L) {
  if (T < 1 || L < 1) throw RangeError("direction-weighted targets need T, L >= 1");
  const double total = double(T + L);
  return {double(T) / total, double(L) / total};
}

namespace {

double loss_of(const StackConfig& stack, const std::vector<CellParams>& params,
               const std::vector<std::vector<Vec>>& inputs, double tt, double td) {
  RadiusCollection col = collect_radii(stack, params, inputs);
  return radius_loss(col.time_radii, tt) + radius_loss(col.depth_radii, td);
}

RadiusGradients fd_radius_grad(const StackConfig& stack, const std::vector<CellParams>& params,
                               const std::vector<std::vector<Vec>>& inputs, double tt, double td,
                               double h) {
  std::size_t total = 0;
  for (const CellParams& p : params) total += p.scalar_count();
  if (total > 5000) {
    throw ConfigurationError("difference-quotient gradient capped at 5000 parameters, got " +
                             std::to_string(total));
  }
  RadiusGradients out;
  out.layers.reserve(params.size());
  for (const CellParams& p : params) out.layers.push_back(zeros_like(p));
  out.loss = loss_of(stack, params, inputs, tt, td);

  std::vector<CellParams> work = params;
  for (std::size_t l = 0; l < params.size(); ++l) {
    for (std::size_t ti = 0; ti < params[l].tensors.size(); ++ti) {
      Matrix& m = work[l].tensors[ti].value;
      Matrix& g = out.layers[l].tensors[ti].value;
      for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
          const double saved = m(i, j);
          m(i, j) = saved + h;
          const double up = loss_of(stack, work, inputs, tt, td);
          m(i, j) = saved - h;
          const double down = loss_of(stack, work, inputs, tt, td);
          m(i, j) = saved;
          g(i, j) = (up - down) / (2.0 * h);
        }
      }
    }
  }
  return out;
}

// Full loss gradient for stacks of the two analytic cells. Every transition
// derivative M at (t, l) is either rho * I (geometric cell) or
// diag(a'(z_{t,l})) V with V one of {W_rec, W_in}. The dominant-eigenpair
// adjoint gives dLoss/dM; its direct part lands on V's entries and on
// z_{t,l}, and the dependence of z on earlier states is resolved by a
// reverse sweep of state adjoints through the trajectory.
RadiusGradients adjoint_radius_grad(const StackConfig& stack,
                                    const std::vector<CellParams>& params,
                                    const std::vector<std::vector<Vec>>& inputs, double tt,
                                    double td) {
  for (const CellSpec& spec : stack.layers) {
    if (spec.type != CellType::PascalRnn && spec.type != CellType::SimpleRnn) {
      throw ConfigurationError(
          "eigenpair-adjoint gradients need an analytic parameter dependence; "
          "available for the geometric and simple recurrent cells only");
    }
  }
  RadiusGradients out;
  out.layers.reserve(params.size());
  for (const CellParams& p : params) out.layers.push_back(zeros_like(p));

  const std::size_t L = stack.depth();
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    StackRun run = stack_forward(stack, params, inputs[b]);
    const std::size_t T = run.time_steps();

    // z-space adjoints from the radii measured at each grid point, plus the
    // direct V-entry contributions.
    std::vector<std::vector<Vec>> c(T + 1, std::vector<Vec>(L));
    for (std::size_t t = 1; t <= T; ++t) {
      for (std::size_t l = 1; l <= L; ++l) {
        const CellSpec& spec = stack.layers[l - 1];
        const CellParams& layer_params = params[l - 1];
        const CellState& prev = run.states[t - 1][l - 1];
        Vec below = run.input_to(t, l);

        if (spec.type == CellType::PascalRnn) {
          const double rho = layer_params.get("rho")(0, 0);
          out.loss += (rho - tt) * (rho - tt) + (rho - td) * (rho - td);
          out.layers[l - 1].get("rho")(0, 0) += 2.0 * (rho - tt) + 2.0 * (rho - td);
          continue;
        }
        c[t][l - 1].assign(spec.width, 0.0);
        Vec z = simple_preactivation(spec, layer_params, prev, below);
        Vec d1, d2;
        activation_derivs(spec.activation, z, d1, d2);
        for (int direction = 0; direction < 2; ++direction) {
          const bool is_time = (direction == 0);
          const double target = is_time ? tt : td;
          const Matrix& v = layer_params.get(is_time ? "W_rec" : "W_in");
          const std::size_t k = std::min(v.rows(), v.cols());
          Matrix msq(k, k);
          for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) msq(i, j) = d1[i] * v(i, j);
          }
          const double rho = spectral_radius(msq);
          out.loss += (rho - target) * (rho - target);
          RadiusGradient rg = spectral_radius_gradient(msq);
          out.degenerate = out.degenerate || rg.degenerate;
          const double coef = 2.0 * (rho - target);
          Matrix& gv = out.layers[l - 1].get(is_time ? "W_rec" : "W_in");
          for (std::size_t p = 0; p < k; ++p) {
            double s_p = 0.0;
            for (std::size_t q = 0; q < k; ++q) {
              gv(p, q) += coef * rg.grad(p, q) * d1[p];
              s_p += coef * rg.grad(p, q) * v(p, q);
            }
            c[t][l - 1][p] += d2[p] * s_p;
          }
        }
      }
    }

    // Reverse sweep: adj[l] = dLoss/d state(t, l) from later grid points.
    std::vector<Vec> adj(L), adj_prev(L);
    for (std::size_t l = 0; l < L; ++l) adj[l].assign(stack.layers[l].width, 0.0);
    for (std::size_t t = T; t >= 1; --t) {
      for (std::size_t l = 0; l < L; ++l) adj_prev[l].assign(stack.layers[l].width, 0.0);
      for (std::size_t l = L; l >= 1; --l) {
        const CellSpec& spec = stack.layers[l - 1];
        const CellParams& layer_params = params[l - 1];
        const CellState& prev = run.states[t - 1][l - 1];
        const Vec& h_prev = prev.state;
        Vec below = run.input_to(t, l);

        if (spec.type == CellType::PascalRnn) {
          const double rho = layer_params.get("rho")(0, 0);
          double& g_rho = out.layers[l - 1].get("rho")(0, 0);
          for (std::size_t i = 0; i < spec.width; ++i) {
            g_rho += adj[l - 1][i] * (h_prev[i] + below[i]);
            adj_prev[l - 1][i] += rho * adj[l - 1][i];
            if (l >= 2) adj_prev[l - 2][i] += rho * adj[l - 1][i];
          }
          continue;
        }
        Vec z = simple_preactivation(spec, layer_params, prev, below);
        Vec d1, d2;
        activation_derivs(spec.activation, z, d1, d2);
        Vec zeta = c[t][l - 1];
        for (std::size_t i = 0; i < spec.width; ++i) zeta[i] += d1[i] * adj[l - 1][i];

        Matrix& g_rec = out.layers[l - 1].get("W_rec");
        Matrix& g_in = out.layers[l - 1].get("W_in");
        Matrix& g_b = out.layers[l - 1].get("b");
        const Matrix& w_rec = layer_params.get("W_rec");
        const Matrix& w_in = layer_params.get("W_in");
        for (std::size_t p = 0; p < spec.width; ++p) {
          for (std::size_t j = 0; j < h_prev.size(); ++j) g_rec(p, j) += zeta[p] * h_prev[j];
          for (std::size_t j = 0; j < below.size(); ++j) g_in(p, j) += zeta[p] * below[j];
          g_b(p, 0) += zeta[p];
          for (std::size_t j = 0; j < h_prev.size(); ++j) {
            adj_prev[l - 1][j] += w_rec(p, j) * zeta[p];
          }
          if (l >= 2) {
            for (std::size_t j = 0; j < below.size(); ++j) {
              adj_prev[l - 2][j] += w_in(p, j) * zeta[p];
            }
          }
        }
      }
      std::swap(adj, adj_prev);
    }
  }
  return out;
}

}  // namespace

RadiusGradients radius_grad(const StackConfig& stack, const std::vector<CellParams>& params,
                            const std::vector<std::vector<Vec>>& input_batch, double time_target,
                            double depth_target, GradMode mode, double fd_step) {
  if (input_batch.empty()) throw SizeError("gradient needs at least one input sequence");
  switch (mode) {
    case GradMode::FiniteDifference:
      return fd_radius_grad(stack, params, input_batch, time_target, depth_target, fd_step);
    case GradMode::EigenAdjoint:
      return adjoint_radius_grad(stack, params, input_batch, time_target, depth_target);
    case GradMode::KappaOnly: break;
  }
  throw ConfigurationError("gradient requested in multiplier-only mode");
}

void AdaBelief::update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& s,
                       double correction1, double correction2, double floor) {
  for (std::size_t i = 0; i < value.rows(); ++i) {
    for (std::size_t j = 0; j < value.cols(); ++j) {
      const double g = grad(i, j);
      m(i, j) = beta1 * m(i, j) + (1.0 - beta1) * g;
      const double diff = g - m(i, j);
      s(i, j) = beta2 * s(i, j) + (1.0 - beta2) * diff * diff + epsilon;
      const double m_hat = m(i, j) / correction1;
      const double s_hat = s(i, j) / correction2;
      double v = value(i, j);
      v -= learning_rate * (m_hat / (std::sqrt(s_hat) + epsilon) + weight_decay * v);
      value(i, j) = std::max(v, floor);
    }
  }
}

void AdaBelief::step(std::vector<CellParams>& params, const std::vector<CellParams>& grads) {
  if (params.size() != grads.size()) throw DimensionError("optimizer: layer count mismatch");
  if (m_.empty()) {
    for (const CellParams& p : params) {
      m_.push_back(zeros_like(p));
      s_.push_back(zeros_like(p));
    }
  }
  ++count_;
  const double c1 = 1.0 - std::pow(beta1, double(count_));
  const double c2 = 1.0 - std::pow(beta2, double(count_));
  for (std::size_t l = 0; l < params.size(); ++l) {
    if (params[l].tensors.size() != grads[l].tensors.size()) {
      throw DimensionError("optimizer: tensor count mismatch at layer " + std::to_string(l + 1));
    }
    for (std::size_t ti = 0; ti < params[l].tensors.size(); ++ti) {
      update(params[l].tensors[ti].value, grads[l].tensors[ti].value, m_[l].tensors[ti].value,
             s_[l].tensors[ti].value, c1, c2, params[l].tensors[ti].floor);
    }
  }
}

void AdaBelief::step_readout(Matrix& value, const Matrix& grad) {
  if (readout_m_.rows() == 0) {
    readout_m_ = Matrix(value.rows(), value.cols());
    readout_s_ = Matrix(value.rows(), value.cols());
  }
  ++readout_count_;
  const double c1 = 1.0 - std::pow(beta1, double(readout_count_));
  const double c2 = 1.0 - std::pow(beta2, double(readout_count_));
  update(value, grad, readout_m_, readout_s_, c1, c2, -1e300);
}

PretrainReport pretrain_run(const StackConfig& stack, std::vector<CellParams> params,
                            const PretrainConfig& config, RandomSource& rng) {
  config.validate();
  stack.validate();
  if (params.size() != stack.depth()) {
    throw ConfigurationError("parameter count does not match layer count");
  }
  const auto [tt, td] = config.weighted
                            ? weighted_targets(config.time_steps, stack.depth())
                            : std::pair<double, double>{config.rho_target, config.rho_target};
  const double mean_target = config.weighted ? 0.5 : config.rho_target;
  const double alpha = 2.0 / (double(config.ema_window) + 1.0);

  PretrainReport report;
  AdaBelief optimizer;
  optimizer.learning_rate = config.learning_rate;
  optimizer.weight_decay = config.weight_decay;

  double ema = 0.0;
  bool ema_ready = false;
  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    auto inputs = draw_batch(stack, config.batch, config.time_steps, rng);
    RadiusCollection col = collect_radii(stack, params, inputs);

    RadiusStats stats;
    stats.mean = col.overall_mean();
    stats.spread = col.spread_over_k();
    ema = ema_ready ? alpha * stats.spread + (1.0 - alpha) * ema : stats.spread;
    ema_ready = true;
    stats.ema_spread = ema;
    stats.time_mean = col.time_layer;
    stats.depth_mean = col.depth_layer;

    PretrainStep entry;
    entry.step = step;
    entry.stats = stats;
    entry.loss = radius_loss(col.time_radii, tt) + radius_loss(col.depth_radii, td);
    if (!std::isfinite(entry.loss)) {
      throw NumericalError("non-finite radius loss at step " + std::to_string(step), step);
    }
    report.steps_taken = step;
    report.final_stats = stats;

    if (std::abs(stats.mean - mean_target) <= config.epsilon &&
        stats.spread < config.spread_threshold && ema < config.spread_threshold) {
      report.converged = true;
      report.trace.push_back(std::move(entry));
      break;
    }

    if (config.grad_mode != GradMode::KappaOnly) {
      RadiusGradients grads =
          radius_grad(stack, params, inputs, tt, td, config.grad_mode, config.fd_step);
      report.degenerate_eigenpair = report.degenerate_eigenpair || grads.degenerate;
      optimizer.step(params, grads.layers);
    }
    for (std::size_t l = 0; l < stack.depth(); ++l) {
      bool degenerate = false;
      const double kt =
          kappa(stats.time_mean[l], tt, &degenerate, config.kappa_low, config.kappa_high);
      const double kd =
          kappa(stats.depth_mean[l], td, &degenerate, config.kappa_low, config.kappa_high);
      report.degenerate_radius = report.degenerate_radius || degenerate;
      params[l] = apply_kappa(params[l], kt, kd);
      entry.kappa_time.push_back(kt);
      entry.kappa_depth.push_back(kd);
    }
    if (config.shuffle) {
      for (CellParams& p : params) p = shuffle_tensors(p, rng);
    }
    report.trace.push_back(std::move(entry));
  }
  report.params = std::move(params);
  return report;
}

}  // namespace lsc
