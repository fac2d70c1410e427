#include "lsc/cells.hpp"

#include <cmath>
#include <cstdio>

#include "lsc/errors.hpp"
#include "lsc/init.hpp"

namespace lsc {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_point(const CellSpec& spec, const CellState& prev, const Vec& input) {
  if (prev.state.size() != spec.state_size())
    throw DimensionError("cell step: previous state length does not match the spec");
  if (input.size() != spec.input_width)
    throw DimensionError("cell step: input length does not match the spec input width");
  if (spec.type == CellType::Alif && prev.spikes.size() != spec.width)
    throw DimensionError("cell step: Alif previous spikes length does not match the width");
}

void check_params(const CellSpec& spec, const CellParams& params, const char* name,
                  std::size_t rows, std::size_t cols) {
  const Matrix& m = params.get(name);
  if (m.rows() != rows || m.cols() != cols)
    throw DimensionError(std::string("cell step: tensor ") + name + " has the wrong shape");
  (void)spec;
}

// --- activations -----------------------------------------------------------

struct ActEval {
  double v, d1, d2;
};

ActEval eval_act(Activation a, double z) {
  switch (a) {
    case Activation::Sigmoid: {
      const double s = sigmoid(z);
      const double d1 = s * (1.0 - s);
      return {s, d1, d1 * (1.0 - 2.0 * s)};
    }
    case Activation::Relu:
      return {z > 0.0 ? z : 0.0, z > 0.0 ? 1.0 : 0.0, 0.0};
    case Activation::Swish: {
      const double s = sigmoid(z);
      const double sp = s * (1.0 - s);
      return {z * s, s + z * sp, sp * (2.0 + z * (1.0 - 2.0 * s))};
    }
  }
  throw ConfigurationError("unknown activation");
}

// --- small dense helpers ----------------------------------------------------

// grad += u (outer) x
void add_outer(Matrix& grad, const Vec& u, const Vec& x) {
  for (std::size_t i = 0; i < grad.rows(); ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    for (std::size_t j = 0; j < grad.cols(); ++j) grad(i, j) += ui * x[j];
  }
}

void add_vec(Matrix& grad, const Vec& u) {
  for (std::size_t i = 0; i < grad.rows(); ++i) grad(i, 0) += u[i];
}

// rows of `m` scaled by `d`: diag(d) * m
Matrix diag_times(const Vec& d, const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = d[i] * m(i, j);
  return out;
}

Vec col_vec(const Matrix& m) {
  Vec out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, 0);
  return out;
}

// --- Gru workspace ----------------------------------------------------------

struct GruWork {
  Vec zeta_z, zeta_r, eta;  // pre-activations
  Vec z, r, hh;             // gates and candidate
};

GruWork gru_work(const CellParams& p, const Vec& h_prev, const Vec& x) {
  GruWork w;
  w.zeta_z = add(add(p.get("W_z").apply(x), p.get("U_z").apply(h_prev)), col_vec(p.get("b_z")));
  w.zeta_r = add(add(p.get("W_r").apply(x), p.get("U_r").apply(h_prev)), col_vec(p.get("b_r")));
  const std::size_t n = h_prev.size();
  w.z.resize(n);
  w.r.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.z[i] = sigmoid(w.zeta_z[i]);
    w.r[i] = sigmoid(w.zeta_r[i]);
  }
  w.eta = add(add(p.get("W_h").apply(x), p.get("U_h").apply(hadamard(w.r, h_prev))),
              col_vec(p.get("b_h")));
  w.hh.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.hh[i] = std::tanh(w.eta[i]);
  return w;
}

// --- Lstm workspace ---------------------------------------------------------

struct LstmWork {
  Vec zi, zf, zo, zc;
  Vec i, f, o, g;
  Vec c, th;  // new cell state and tanh(c)
};

LstmWork lstm_work(const CellParams& p, const Vec& h_prev, const Vec& c_prev, const Vec& x) {
  LstmWork w;
  w.zi = add(add(p.get("W_i").apply(x), p.get("U_i").apply(h_prev)), col_vec(p.get("b_i")));
  w.zf = add(add(p.get("W_f").apply(x), p.get("U_f").apply(h_prev)), col_vec(p.get("b_f")));
  w.zo = add(add(p.get("W_o").apply(x), p.get("U_o").apply(h_prev)), col_vec(p.get("b_o")));
  w.zc = add(add(p.get("W_c").apply(x), p.get("U_c").apply(h_prev)), col_vec(p.get("b_c")));
  const std::size_t n = h_prev.size();
  w.i.resize(n);
  w.f.resize(n);
  w.o.resize(n);
  w.g.resize(n);
  w.c.resize(n);
  w.th.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    w.i[k] = sigmoid(w.zi[k]);
    w.f[k] = sigmoid(w.zf[k]);
    w.o[k] = sigmoid(w.zo[k]);
    w.g[k] = std::tanh(w.zc[k]);
    w.c[k] = w.f[k] * c_prev[k] + w.i[k] * w.g[k];
    w.th[k] = std::tanh(w.c[k]);
  }
  return w;
}

// --- Alif workspace ---------------------------------------------------------

struct AlifWork {
  Vec alpha_y, alpha_th;  // exp(-1/tau)
  Vec y, th;              // new voltage and threshold
  Vec s;                  // y - th
};

AlifWork alif_rates(const CellParams& p, std::size_t n) {
  AlifWork w;
  w.alpha_y.resize(n);
  w.alpha_th.resize(n);
  const Matrix& ty = p.get("tau_y");
  const Matrix& tt = p.get("tau_theta");
  for (std::size_t i = 0; i < n; ++i) {
    w.alpha_y[i] = std::exp(-1.0 / ty(i, 0));
    w.alpha_th[i] = std::exp(-1.0 / tt(i, 0));
  }
  return w;
}

Vec alif_psi(const CellSpec& spec, const Vec& y, const Vec& th) {
  Vec psi(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    psi[i] = surrogate_heaviside(y[i] - th[i], spec.gamma, spec.omega).second;
  return psi;
}

}  // namespace

// --- CellSpec ---------------------------------------------------------------

std::size_t CellSpec::state_size() const {
  return (type == CellType::Lstm || type == CellType::Alif) ? 2 * width : width;
}

std::size_t CellSpec::output_size() const { return width; }

void CellSpec::validate() const {
  if (width < 1 || input_width < 1) throw ConfigurationError("cell widths must be at least 1");
  if (type == CellType::PascalRnn) {
    if (rho < 0.0) throw ConfigurationError("PascalRnn coefficient must be non-negative");
    if (input_width != width)
      throw ConfigurationError("PascalRnn adds states elementwise; widths must match");
  }
  if (type == CellType::Alif) {
    if (!(gamma > 0.0) || !(omega > 0.0))
      throw ConfigurationError("Alif dampening and sharpness must be positive");
    if (!(tau_y_mean > 0.0) || !(tau_theta_mean > 0.0) || !(b_theta_mean > 0.0) ||
        !(beta_mean > 0.0))
      throw ConfigurationError("Alif rate-parameter means must be positive");
  }
}

// --- CellParams ---------------------------------------------------------------

const Matrix& CellParams::get(const std::string& name) const {
  for (const ParamTensor& t : tensors)
    if (t.name == name) return t.value;
  throw ConfigurationError("unknown parameter tensor: " + name);
}

Matrix& CellParams::get(const std::string& name) {
  for (ParamTensor& t : tensors)
    if (t.name == name) return t.value;
  throw ConfigurationError("unknown parameter tensor: " + name);
}

bool CellParams::has(const std::string& name) const {
  for (const ParamTensor& t : tensors)
    if (t.name == name) return true;
  return false;
}

std::size_t CellParams::scalar_count() const {
  std::size_t n = 0;
  for (const ParamTensor& t : tensors) n += t.value.rows() * t.value.cols();
  return n;
}

CellParams zeros_like(const CellParams& params) {
  CellParams out;
  out.tensors.reserve(params.tensors.size());
  for (const ParamTensor& t : params.tensors)
    out.tensors.push_back({t.name, Matrix(t.value.rows(), t.value.cols()), t.group, t.floor});
  return out;
}

CellState initial_state(const CellSpec& spec) {
  CellState s;
  s.state.assign(spec.state_size(), 0.0);
  if (spec.type == CellType::Alif) s.spikes.assign(spec.width, 0.0);
  return s;
}

std::pair<double, double> surrogate_heaviside(double v, double gamma, double omega) {
  if (!(gamma > 0.0) || !(omega > 0.0))
    throw ConfigurationError("surrogate_heaviside: gamma and omega must be positive");
  const double den = 1.0 + omega * std::fabs(v);
  return {v >= 0.0 ? 1.0 : 0.0, gamma / (den * den)};
}

double relaxed_spike(double v, double gamma, double omega) {
  return 0.5 + gamma * v / (1.0 + omega * std::fabs(v));
}

// --- initialization -----------------------------------------------------------

namespace {

Matrix glorot_bias(std::size_t n, RandomSource& rng) {
  // Width-n bias with fan_in = fan_out = n, limit sqrt(3/n).
  const double lim = std::sqrt(3.0 / static_cast<double>(n));
  Matrix b(n, 1);
  for (std::size_t i = 0; i < n; ++i) b(i, 0) = rng.uniform(-lim, lim);
  return b;
}

Matrix truncated_vec(std::size_t n, double mean, RandomSource& rng) {
  Matrix v(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    v(i, 0) = rng.truncated_positive_normal(mean, 3.0 * mean / 7.0);
  return v;
}

void push(CellParams& p, std::string name, Matrix value, KappaGroup group,
          double floor = -1e300) {
  p.tensors.push_back({std::move(name), std::move(value), group, floor});
}

}  // namespace

CellParams init_cell_params(const CellSpec& spec, RandomSource& rng) {
  spec.validate();
  const std::size_t n = spec.width, m = spec.input_width;
  CellParams p;
  switch (spec.type) {
    case CellType::PascalRnn: {
      Matrix r(1, 1);
      r(0, 0) = spec.rho;
      push(p, "rho", r, KappaGroup::Geometric, 0.0);
      return p;
    }
    case CellType::SimpleRnn:
      push(p, "W_rec", init_matrix(InitScheme::Orthogonal, n, n, rng), KappaGroup::Recurrent);
      push(p, "W_in", init_matrix(InitScheme::GlorotUniform, n, m, rng), KappaGroup::Input);
      push(p, "b", glorot_bias(n, rng), KappaGroup::None);
      return p;
    case CellType::Gru:
      for (const char* g : {"z", "r", "h"}) {
        push(p, std::string("W_") + g, init_matrix(InitScheme::GlorotUniform, n, m, rng),
             KappaGroup::Input);
        push(p, std::string("U_") + g, init_matrix(InitScheme::Orthogonal, n, n, rng),
             KappaGroup::Recurrent);
        push(p, std::string("b_") + g, Matrix(n, 1), KappaGroup::None);
      }
      return p;
    case CellType::Lstm:
      for (const char* g : {"i", "f", "o", "c"}) {
        push(p, std::string("W_") + g, init_matrix(InitScheme::GlorotUniform, n, m, rng),
             KappaGroup::Input);
        push(p, std::string("U_") + g, init_matrix(InitScheme::Orthogonal, n, n, rng),
             KappaGroup::Recurrent);
        push(p, std::string("b_") + g, Matrix(n, 1), KappaGroup::None);
      }
      return p;
    case CellType::Alif: {
      push(p, "W_rec", init_matrix(InitScheme::GlorotUniform, n, n, rng), KappaGroup::Recurrent);
      push(p, "W_in", init_matrix(InitScheme::GlorotUniform, n, m, rng), KappaGroup::Input);
      push(p, "tau_y", truncated_vec(n, spec.tau_y_mean, rng), KappaGroup::Recurrent, 0.1);
      push(p, "tau_theta", truncated_vec(n, spec.tau_theta_mean, rng), KappaGroup::Recurrent,
           0.1);
      push(p, "b_theta", truncated_vec(n, spec.b_theta_mean, rng), KappaGroup::Input);
      Matrix beta(n, 1);
      if (spec.variant == AlifVariant::Plus) {
        beta = truncated_vec(n, spec.beta_mean, rng);
      } else {
        const double std = spec.beta_mean / static_cast<double>(m);
        for (std::size_t i = 0; i < n; ++i) beta(i, 0) = rng.normal(0.0, std);
      }
      push(p, "beta", beta, KappaGroup::Input);
      return p;
    }
  }
  throw ConfigurationError("unknown cell type");
}

// --- forward -------------------------------------------------------------------

CellState cell_forward(const CellSpec& spec, const CellParams& params, const CellState& prev,
                       const Vec& input) {
  check_point(spec, prev, input);
  const std::size_t n = spec.width;
  CellState next;
  switch (spec.type) {
    case CellType::PascalRnn: {
      const double rho = params.get("rho")(0, 0);
      next.state.resize(n);
      for (std::size_t i = 0; i < n; ++i) next.state[i] = rho * (prev.state[i] + input[i]);
      return next;
    }
    case CellType::SimpleRnn: {
      check_params(spec, params, "W_rec", n, n);
      check_params(spec, params, "W_in", n, spec.input_width);
      const Vec z = simple_preactivation(spec, params, prev, input);
      next.state.resize(n);
      for (std::size_t i = 0; i < n; ++i) next.state[i] = eval_act(spec.activation, z[i]).v;
      return next;
    }
    case CellType::Gru: {
      const GruWork w = gru_work(params, prev.state, input);
      next.state.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        next.state[i] = (1.0 - w.z[i]) * prev.state[i] + w.z[i] * w.hh[i];
      return next;
    }
    case CellType::Lstm: {
      const Vec h_prev(prev.state.begin(), prev.state.begin() + n);
      const Vec c_prev(prev.state.begin() + n, prev.state.end());
      const LstmWork w = lstm_work(params, h_prev, c_prev, input);
      next.state.resize(2 * n);
      for (std::size_t k = 0; k < n; ++k) {
        next.state[k] = w.o[k] * w.th[k];
        next.state[n + k] = w.c[k];
      }
      return next;
    }
    case CellType::Alif: {
      const Vec y_prev(prev.state.begin(), prev.state.begin() + n);
      const Vec th_prev(prev.state.begin() + n, prev.state.end());
      const AlifWork rates = alif_rates(params, n);
      const Vec rec = params.get("W_rec").apply(prev.spikes);
      const Vec in = params.get("W_in").apply(input);
      const Matrix& b_th = params.get("b_theta");
      const Matrix& beta = params.get("beta");
      next.state.resize(2 * n);
      next.spikes.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double y = rates.alpha_y[i] * y_prev[i] + rec[i] + in[i] -
                         th_prev[i] * prev.spikes[i];
        const double th =
            rates.alpha_th[i] * th_prev[i] + b_th(i, 0) + beta(i, 0) * prev.spikes[i];
        next.state[i] = y;
        next.state[n + i] = th;
        const double s = y - th;
        next.spikes[i] = spec.relaxed_spikes ? relaxed_spike(s, spec.gamma, spec.omega)
                                             : surrogate_heaviside(s, spec.gamma, spec.omega).first;
      }
      return next;
    }
  }
  throw ConfigurationError("unknown cell type");
}

// --- Jacobians -------------------------------------------------------------------

Matrix jac_time(const CellSpec& spec, const CellParams& params, const CellState& prev,
                const Vec& input) {
  check_point(spec, prev, input);
  const std::size_t n = spec.width;
  switch (spec.type) {
    case CellType::PascalRnn:
      return Matrix::identity(n) * params.get("rho")(0, 0);
    case CellType::SimpleRnn: {
      const Vec z = simple_preactivation(spec, params, prev, input);
      Vec d1(n);
      for (std::size_t i = 0; i < n; ++i) d1[i] = eval_act(spec.activation, z[i]).d1;
      return diag_times(d1, params.get("W_rec"));
    }
    case CellType::Gru: {
      const GruWork w = gru_work(params, prev.state, input);
      Vec dz(n), dr(n), gate(n), cand(n);
      for (std::size_t i = 0; i < n; ++i) {
        dz[i] = w.z[i] * (1.0 - w.z[i]);
        dr[i] = w.r[i] * (1.0 - w.r[i]);
        gate[i] = (w.hh[i] - prev.state[i]) * dz[i];
        cand[i] = w.z[i] * (1.0 - w.hh[i] * w.hh[i]);
      }
      // d eta / d h_prev = U_h (diag(r) + diag(h_prev) diag(dr) U_r)
      Matrix inner = diag_times(hadamard(prev.state, dr), params.get("U_r"));
      for (std::size_t i = 0; i < n; ++i) inner(i, i) += w.r[i];
      Matrix m = diag_times(gate, params.get("U_z")) +
                 diag_times(cand, params.get("U_h") * inner);
      for (std::size_t i = 0; i < n; ++i) m(i, i) += 1.0 - w.z[i];
      return m;
    }
    case CellType::Lstm: {
      const Vec h_prev(prev.state.begin(), prev.state.begin() + n);
      const Vec c_prev(prev.state.begin() + n, prev.state.end());
      const LstmWork w = lstm_work(params, h_prev, c_prev, input);
      Vec wi(n), wf(n), wc(n), wo(n), oth(n);
      for (std::size_t k = 0; k < n; ++k) {
        wi[k] = w.g[k] * w.i[k] * (1.0 - w.i[k]);
        wf[k] = c_prev[k] * w.f[k] * (1.0 - w.f[k]);
        wc[k] = w.i[k] * (1.0 - w.g[k] * w.g[k]);
        wo[k] = w.th[k] * w.o[k] * (1.0 - w.o[k]);
        oth[k] = w.o[k] * (1.0 - w.th[k] * w.th[k]);
      }
      const Matrix dc_dh = diag_times(wi, params.get("U_i")) +
                           diag_times(wf, params.get("U_f")) +
                           diag_times(wc, params.get("U_c"));
      const Matrix dh_dh = diag_times(oth, dc_dh) + diag_times(wo, params.get("U_o"));
      Matrix m(2 * n, 2 * n);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          m(a, b) = dh_dh(a, b);
          m(n + a, b) = dc_dh(a, b);
        }
        m(a, n + a) = oth[a] * w.f[a];
        m(n + a, n + a) = w.f[a];
      }
      return m;
    }
    case CellType::Alif: {
      const Vec y_prev(prev.state.begin(), prev.state.begin() + n);
      const Vec th_prev(prev.state.begin() + n, prev.state.end());
      const AlifWork rates = alif_rates(params, n);
      const Vec psi = alif_psi(spec, y_prev, th_prev);
      const Matrix& w_rec = params.get("W_rec");
      const Matrix& beta = params.get("beta");
      Matrix m(2 * n, 2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          // A = W_rec - diag(theta_prev) carries the spike into the voltage.
          const double a = w_rec(i, j) - (i == j ? th_prev[i] : 0.0);
          m(i, j) = a * psi[j];
          m(i, n + j) = -a * psi[j];
        }
        m(i, i) += rates.alpha_y[i];
        m(i, n + i) -= prev.spikes[i];
        m(n + i, i) = beta(i, 0) * psi[i];
        m(n + i, n + i) = rates.alpha_th[i] - beta(i, 0) * psi[i];
      }
      return m;
    }
  }
  throw ConfigurationError("unknown cell type");
}

Matrix jac_input(const CellSpec& spec, const CellParams& params, const CellState& prev,
                 const Vec& input) {
  check_point(spec, prev, input);
  const std::size_t n = spec.width;
  switch (spec.type) {
    case CellType::PascalRnn:
      return Matrix::identity(n) * params.get("rho")(0, 0);
    case CellType::SimpleRnn: {
      const Vec z = simple_preactivation(spec, params, prev, input);
      Vec d1(n);
      for (std::size_t i = 0; i < n; ++i) d1[i] = eval_act(spec.activation, z[i]).d1;
      return diag_times(d1, params.get("W_in"));
    }
    case CellType::Gru: {
      const GruWork w = gru_work(params, prev.state, input);
      Vec dz(n), dr(n), gate(n), cand(n);
      for (std::size_t i = 0; i < n; ++i) {
        dz[i] = w.z[i] * (1.0 - w.z[i]);
        dr[i] = w.r[i] * (1.0 - w.r[i]);
        gate[i] = (w.hh[i] - prev.state[i]) * dz[i];
        cand[i] = w.z[i] * (1.0 - w.hh[i] * w.hh[i]);
      }
      const Matrix deta = params.get("W_h") + params.get("U_h") * diag_times(
                              hadamard(prev.state, dr), params.get("W_r"));
      return diag_times(gate, params.get("W_z")) + diag_times(cand, deta);
    }
    case CellType::Lstm: {
      const Vec h_prev(prev.state.begin(), prev.state.begin() + n);
      const Vec c_prev(prev.state.begin() + n, prev.state.end());
      const LstmWork w = lstm_work(params, h_prev, c_prev, input);
      Vec wi(n), wf(n), wc(n), wo(n), oth(n);
      for (std::size_t k = 0; k < n; ++k) {
        wi[k] = w.g[k] * w.i[k] * (1.0 - w.i[k]);
        wf[k] = c_prev[k] * w.f[k] * (1.0 - w.f[k]);
        wc[k] = w.i[k] * (1.0 - w.g[k] * w.g[k]);
        wo[k] = w.th[k] * w.o[k] * (1.0 - w.o[k]);
        oth[k] = w.o[k] * (1.0 - w.th[k] * w.th[k]);
      }
      const Matrix dc_dx = diag_times(wi, params.get("W_i")) +
                           diag_times(wf, params.get("W_f")) +
                           diag_times(wc, params.get("W_c"));
      const Matrix dh_dx = diag_times(oth, dc_dx) + diag_times(wo, params.get("W_o"));
      Matrix m(2 * n, spec.input_width);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < spec.input_width; ++b) {
          m(a, b) = dh_dx(a, b);
          m(n + a, b) = dc_dx(a, b);
        }
      return m;
    }
    case CellType::Alif: {
      const Matrix& w_in = params.get("W_in");
      Matrix m(2 * n, spec.input_width);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < spec.input_width; ++b) m(a, b) = w_in(a, b);
      return m;
    }
  }
  throw ConfigurationError("unknown cell type");
}

Vec cell_output(const CellSpec& spec, const CellState& state) {
  switch (spec.type) {
    case CellType::Lstm:
      return Vec(state.state.begin(), state.state.begin() + spec.width);
    case CellType::Alif:
      return state.spikes;
    default:
      return state.state;
  }
}

Matrix output_jacobian(const CellSpec& spec, const CellState& state) {
  const std::size_t n = spec.width;
  switch (spec.type) {
    case CellType::Lstm: {
      Matrix m(n, 2 * n);
      for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
      return m;
    }
    case CellType::Alif: {
      const Vec y(state.state.begin(), state.state.begin() + n);
      const Vec th(state.state.begin() + n, state.state.end());
      const Vec psi = alif_psi(spec, y, th);
      Matrix m(n, 2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = psi[i];
        m(i, n + i) = -psi[i];
      }
      return m;
    }
    default:
      return Matrix::identity(n);
  }
}

Matrix jac_depth(const CellSpec& spec, const CellParams& params, const CellState& prev,
                 const Vec& input, const CellSpec& below_spec, const CellState& below_state) {
  const Matrix jin = jac_input(spec, params, prev, input);
  if (jin.cols() != below_spec.output_size())
    throw DimensionError("jac_depth: layer widths do not chain");
  if (below_spec.type == CellType::Lstm || below_spec.type == CellType::Alif)
    return jin * output_jacobian(below_spec, below_state);
  return jin;  // output selection is the identity
}

// --- parameter VJP -----------------------------------------------------------------

void cell_param_vjp(const CellSpec& spec, const CellParams& params, const CellState& prev,
                    const Vec& input, const Vec& u, CellParams& grad) {
  check_point(spec, prev, input);
  if (u.size() != spec.state_size())
    throw DimensionError("cell_param_vjp: adjoint length does not match the state size");
  const std::size_t n = spec.width;
  switch (spec.type) {
    case CellType::PascalRnn: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += u[i] * (prev.state[i] + input[i]);
      grad.get("rho")(0, 0) += acc;
      return;
    }
    case CellType::SimpleRnn: {
      const Vec z = simple_preactivation(spec, params, prev, input);
      Vec w(n);
      for (std::size_t i = 0; i < n; ++i) w[i] = u[i] * eval_act(spec.activation, z[i]).d1;
      add_outer(grad.get("W_rec"), w, prev.state);
      add_outer(grad.get("W_in"), w, input);
      add_vec(grad.get("b"), w);
      return;
    }
    case CellType::Gru: {
      const GruWork w = gru_work(params, prev.state, input);
      Vec uz(n), uh(n);
      for (std::size_t i = 0; i < n; ++i) {
        uz[i] = u[i] * (w.hh[i] - prev.state[i]) * w.z[i] * (1.0 - w.z[i]);
        uh[i] = u[i] * w.z[i] * (1.0 - w.hh[i] * w.hh[i]);
      }
      const Vec rh = hadamard(w.r, prev.state);
      add_outer(grad.get("W_z"), uz, input);
      add_outer(grad.get("U_z"), uz, prev.state);
      add_vec(grad.get("b_z"), uz);
      add_outer(grad.get("W_h"), uh, input);
      add_outer(grad.get("U_h"), uh, rh);
      add_vec(grad.get("b_h"), uh);
      Vec ur = params.get("U_h").apply_transpose(uh);
      for (std::size_t q = 0; q < n; ++q)
        ur[q] *= prev.state[q] * w.r[q] * (1.0 - w.r[q]);
      add_outer(grad.get("W_r"), ur, input);
      add_outer(grad.get("U_r"), ur, prev.state);
      add_vec(grad.get("b_r"), ur);
      return;
    }
    case CellType::Lstm: {
      const Vec h_prev(prev.state.begin(), prev.state.begin() + n);
      const Vec c_prev(prev.state.begin() + n, prev.state.end());
      const LstmWork w = lstm_work(params, h_prev, c_prev, input);
      Vec wi(n), wf(n), wc(n), wo(n);
      for (std::size_t k = 0; k < n; ++k) {
        const double ac = u[n + k] + u[k] * w.o[k] * (1.0 - w.th[k] * w.th[k]);
        wi[k] = ac * w.g[k] * w.i[k] * (1.0 - w.i[k]);
        wf[k] = ac * c_prev[k] * w.f[k] * (1.0 - w.f[k]);
        wc[k] = ac * w.i[k] * (1.0 - w.g[k] * w.g[k]);
        wo[k] = u[k] * w.th[k] * w.o[k] * (1.0 - w.o[k]);
      }
      const struct {
        const char* gate;
        const Vec& adj;
      } parts[] = {{"i", wi}, {"f", wf}, {"o", wo}, {"c", wc}};
      for (const auto& part : parts) {
        add_outer(grad.get(std::string("W_") + part.gate), part.adj, input);
        add_outer(grad.get(std::string("U_") + part.gate), part.adj, h_prev);
        add_vec(grad.get(std::string("b_") + part.gate), part.adj);
      }
      return;
    }
    case CellType::Alif: {
      const Vec y_prev(prev.state.begin(), prev.state.begin() + n);
      const Vec th_prev(prev.state.begin() + n, prev.state.end());
      const AlifWork rates = alif_rates(params, n);
      const Matrix& ty = params.get("tau_y");
      const Matrix& tt = params.get("tau_theta");
      const Vec uy(u.begin(), u.begin() + n);
      const Vec uth(u.begin() + n, u.end());
      add_outer(grad.get("W_rec"), uy, prev.spikes);
      add_outer(grad.get("W_in"), uy, input);
      add_vec(grad.get("b_theta"), uth);
      Matrix& g_beta = grad.get("beta");
      Matrix& g_ty = grad.get("tau_y");
      Matrix& g_tt = grad.get("tau_theta");
      for (std::size_t i = 0; i < n; ++i) {
        g_beta(i, 0) += uth[i] * prev.spikes[i];
        // d alpha / d tau = alpha / tau^2
        g_ty(i, 0) += uy[i] * y_prev[i] * rates.alpha_y[i] / (ty(i, 0) * ty(i, 0));
        g_tt(i, 0) += uth[i] * th_prev[i] * rates.alpha_th[i] / (tt(i, 0) * tt(i, 0));
      }
      return;
    }
  }
  throw ConfigurationError("unknown cell type");
}

Vec simple_preactivation(const CellSpec& spec, const CellParams& params, const CellState& prev,
                         const Vec& input) {
  return add(add(params.get("W_rec").apply(prev.state), params.get("W_in").apply(input)),
             col_vec(params.get("b")));
}

void activation_derivs(Activation a, const Vec& z, Vec& d1, Vec& d2) {
  d1.resize(z.size());
  d2.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const ActEval e = eval_act(a, z[i]);
    d1[i] = e.d1;
    d2[i] = e.d2;
  }
}

}  // namespace lsc
