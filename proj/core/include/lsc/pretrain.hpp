#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lsc/cells.hpp"
#include "lsc/matrix.hpp"
#include "lsc/rng.hpp"
#include "lsc/stack.hpp"

namespace lsc {

enum class GradMode { KappaOnly, FiniteDifference, EigenAdjoint };

GradMode grad_mode_from_string(const std::string& name);
std::string to_string(GradMode mode);

// Default mode per cell: analytic adjoints where the parameter dependence is
// closed-form, finite differences for the gated cells while small enough,
// multiplier-only for the spiking cell (surrogate curvature is too rough).
GradMode default_grad_mode(CellType cell, std::size_t width);

struct PretrainConfig {
  double rho_target = 1.0;
  bool weighted = false;  // split the target over directions: (T/(T+L), L/(T+L))
  double epsilon = 0.02;
  double spread_threshold = 0.2;
  std::size_t ema_window = 10;
  double kappa_low = 0.85;
  double kappa_high = 1.15;
  double learning_rate = 3.14e-3;
  double weight_decay = 1e-4;
  std::size_t max_steps = 500;
  std::size_t batch = 2;
  std::size_t time_steps = 6;
  bool shuffle = true;
  GradMode grad_mode = GradMode::KappaOnly;
  double fd_step = 1e-4;

  void validate() const;
};

struct RadiusStats {
  double mean = 0.0;        // over every transition derivative in the batch
  double spread = 0.0;      // std over grid positions k of per-k batch means
  double ema_spread = 0.0;  // moving average of spread, window from the config
  std::vector<double> time_mean;   // per layer, mean over (t, batch)
  std::vector<double> depth_mean;  // per layer, mean over (t, batch)
};

struct PretrainStep {
  std::size_t step = 0;
  RadiusStats stats;
  double loss = 0.0;
  std::vector<double> kappa_time;   // empty on the step that converged
  std::vector<double> kappa_depth;  // (no multiplier was applied)
};

struct PretrainReport {
  bool converged = false;
  std::size_t steps_taken = 0;
  RadiusStats final_stats;
  bool degenerate_radius = false;     // some kappa hit the vanishing-radius fallback
  bool degenerate_eigenpair = false;  // some adjoint fell back to differences
  std::vector<CellParams> params;
  std::vector<PretrainStep> trace;
};

// Sum of squared deviations of the radii from the target.
double radius_loss(const std::vector<double>& radii, double rho_target);

// clip(rho_target / rho, 0.85, 1.15); a vanishing radius returns the upper
// clip and sets *degenerate when given.
double kappa(double rho, double rho_target, bool* degenerate = nullptr, double low = 0.85,
             double high = 1.15);

// Scales input-side tensors by kappa_depth, recurrent-side by kappa_time,
// geometric ones by sqrt of the product; entries are clamped at each
// tensor's floor afterwards.
CellParams apply_kappa(const CellParams& params, double kappa_time, double kappa_depth);

// Uniformly permutes the entries within each tensor (shapes and entry
// multisets preserved).
CellParams shuffle_tensors(const CellParams& params, RandomSource& rng);

// Direction-resolved radius targets (rho_time, rho_depth) = (T, L)/(T+L).
std::pair<double, double> weighted_targets(std::size_t T, std::size_t L);

struct RadiusGradients {
  std::vector<CellParams> layers;
  double loss = 0.0;
  bool degenerate = false;  // an adjoint fell back to differences somewhere
};

// Gradient of the radius loss w.r.t. every learnable tensor, over a batch of
// input sequences. finite_difference: central differences on the loss
// (total parameter count capped at 5000). eigen_adjoint: dominant-eigenpair
// adjoint chained through the analytic parameter dependence (PascalRNN and
// SimpleRNN stacks only).
RadiusGradients radius_grad(const StackConfig& stack, const std::vector<CellParams>& params,
                            const std::vector<std::vector<Vec>>& input_batch, double time_target,
                            double depth_target, GradMode mode, double fd_step = 1e-4);

// AdaBelief: the second-moment accumulator tracks the variance of the
// gradient around its running mean, with decoupled weight decay.
struct AdaBelief {
  double learning_rate = 3.14e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-16;

  void step(std::vector<CellParams>& params, const std::vector<CellParams>& grads);
  // Single-matrix variant for a readout; keeps its own slot and counter.
  void step_readout(Matrix& value, const Matrix& grad);

 private:
  void update(Matrix& value, const Matrix& grad, Matrix& m, Matrix& s, double correction1,
              double correction2, double floor);
  std::vector<CellParams> m_, s_;
  Matrix readout_m_, readout_s_;
  std::size_t count_ = 0;
  std::size_t readout_count_ = 0;
};

PretrainReport pretrain_run(const StackConfig& stack, std::vector<CellParams> params,
                            const PretrainConfig& config, RandomSource& rng);

}  // namespace lsc
