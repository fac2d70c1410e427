#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "lsc/matrix.hpp"
#include "lsc/rng.hpp"

namespace lsc {

// The five layer kinds. PascalRnn is a linear toy cell whose end-to-end
// Jacobians have a closed form, used to validate the grid machinery.
enum class CellType { PascalRnn, SimpleRnn, Gru, Lstm, Alif };

enum class Activation { Sigmoid, Relu, Swish };

// Alif spike-adaptation initialization: Plus draws beta from a positive
// truncated Gaussian, PlusMinus from a zero-centered Gaussian.
enum class AlifVariant { Plus, PlusMinus };

struct CellSpec {
  CellType type = CellType::SimpleRnn;
  std::size_t width = 1;        // units in this layer (n_l)
  std::size_t input_width = 1;  // units feeding in from below (n_{l-1})

  double rho = 1.0;  // PascalRnn initial transition coefficient

  Activation activation = Activation::Sigmoid;  // SimpleRnn only

  // Alif options.
  AlifVariant variant = AlifVariant::Plus;
  double gamma = 0.5;  // pseudo-derivative dampening
  double omega = 1.0;  // pseudo-derivative sharpness
  // Replaces the hard spike with the fast sigmoid whose derivative equals the
  // pseudo-derivative; used only to validate the analytic Jacobians against
  // finite differences of a differentiable forward pass.
  bool relaxed_spikes = false;
  // Means of the truncated-Gaussian draws for the rate parameters.
  double tau_y_mean = 0.1;
  double tau_theta_mean = 100.0;
  double b_theta_mean = 0.01;
  double beta_mean = 1.8;

  // Length of the concatenated state vector: width for single-state cells,
  // 2*width for Lstm ([h; c]) and Alif ([y; theta]).
  std::size_t state_size() const;
  // Length of the vector fed to the layer above (h for Lstm, spikes for
  // Alif, the state itself otherwise). Always equals width.
  std::size_t output_size() const;
  void validate() const;  // throws ConfigurationError on bad fields
};

// How a tensor reacts to the per-layer kappa multipliers: Recurrent tensors
// scale with the time-transition kappa, Input tensors with the
// depth-transition kappa, Geometric (the PascalRnn coefficient, which is both
// the time and depth coefficient at once) with their geometric mean.
enum class KappaGroup { None, Recurrent, Input, Geometric };

struct ParamTensor {
  std::string name;
  Matrix value;
  KappaGroup group = KappaGroup::None;
  // Lower clamp applied after every multiplicative or gradient update; keeps
  // Alif time constants positive (they sit inside exp(-1/tau)).
  double floor = -1e300;
};

// Ordered list of a cell's learnable tensors. Order is fixed per cell type so
// that shuffling, kappa application and optimizer state iterate
// deterministically.
struct CellParams {
  std::vector<ParamTensor> tensors;

  const Matrix& get(const std::string& name) const;
  Matrix& get(const std::string& name);
  bool has(const std::string& name) const;
  std::size_t scalar_count() const;
};

// Gradient (or optimizer-moment) container with the same tensor layout.
CellParams zeros_like(const CellParams& params);

// Concatenated hidden vector plus, for Alif, the spikes emitted at this step.
// Spikes are stored rather than recomputed because the initial condition is
// "no spikes yet" even though H(y0 - theta0) need not be zero.
struct CellState {
  Vec state;
  Vec spikes;
};

CellState initial_state(const CellSpec& spec);  // zeros, no spikes

// Hard threshold with the dampened fast-sigmoid pseudo-derivative used in the
// backward pass: value H(v >= 0), pseudo-derivative gamma / (1 + omega|v|)^2.
std::pair<double, double> surrogate_heaviside(double v, double gamma, double omega);

// Differentiable stand-in 0.5 + gamma*v/(1 + omega|v|); its true derivative
// is exactly the pseudo-derivative above.
double relaxed_spike(double v, double gamma, double omega);

// Default initialization: GRU/LSTM use Glorot input matrices, Orthogonal
// recurrent matrices and zero biases; SimpleRnn draws its bias Glorot-style
// so neurons are not silent on zero input; Alif rate parameters come from
// truncated Gaussians of mean mu and std 3*mu/7.
CellParams init_cell_params(const CellSpec& spec, RandomSource& rng);

// One step of the recurrence. `prev` is this layer's state at t-1 and
// `input` is the output of the layer below at t-1 (or the task input).
CellState cell_forward(const CellSpec& spec, const CellParams& params, const CellState& prev,
                       const Vec& input);

// Analytic Jacobian of the new concatenated state w.r.t. the previous
// concatenated state of the same layer (square, state_size x state_size).
// Spike derivatives use the surrogate pseudo-derivative.
Matrix jac_time(const CellSpec& spec, const CellParams& params, const CellState& prev,
                const Vec& input);

// Analytic Jacobian of the new state w.r.t. the raw input vector
// (state_size x input_width).
Matrix jac_input(const CellSpec& spec, const CellParams& params, const CellState& prev,
                 const Vec& input);

// The vector a layer passes upward, and its Jacobian w.r.t. the layer's own
// concatenated state: identity for single-state cells, [I 0] for Lstm,
// [diag(psi) -diag(psi)] for Alif spikes.
Vec cell_output(const CellSpec& spec, const CellState& state);
Matrix output_jacobian(const CellSpec& spec, const CellState& state);

// Depth-transition Jacobian between stacked layers: the input Jacobian of
// layer l chained through the output selection of layer l-1, so its shape is
// state_size(l) x state_size(l-1).
Matrix jac_depth(const CellSpec& spec, const CellParams& params, const CellState& prev,
                 const Vec& input, const CellSpec& below_spec, const CellState& below_state);

// Accumulates u^T * d(new state)/d(theta) into `grad` for every learnable
// tensor; u has length state_size. Used by reverse-mode sweeps and by the
// update-decomposition analysis.
void cell_param_vjp(const CellSpec& spec, const CellParams& params, const CellState& prev,
                    const Vec& input, const Vec& u, CellParams& grad);

// Pre-activation z = W_rec h_prev + W_in x + b of a SimpleRnn step, and the
// first/second activation derivatives, exposed so the adjoint radius
// gradient can chain through the same arithmetic as the Jacobians.
Vec simple_preactivation(const CellSpec& spec, const CellParams& params, const CellState& prev,
                         const Vec& input);
void activation_derivs(Activation a, const Vec& z, Vec& d1, Vec& d2);

}  // namespace lsc
