#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "lsc/matrix.hpp"
#include "lsc/stack.hpp"

namespace lsc {

// One-step transition derivatives at grid point (t, l), t in 1..T, l in 1..L.
// time_jac = d state(t,l) / d state(t-1,l); depth_jac = d state(t,l) /
// d state(t-1,l-1) for l >= 2 and d state(t,1) / d input(t) for l = 1.
// Spectral radii of rectangular maps are taken on the leading square block.
struct TransitionJacobians {
  std::size_t t = 0;
  std::size_t l = 0;
  Matrix time_jac;
  Matrix depth_jac;
  double rho_time = 0.0;
  double rho_depth = 0.0;
  std::array<double, 3> a_time{};   // induced norms, p = 1, 2, inf
  std::array<double, 3> a_depth{};  // induced norms, p = 1, 2, inf
};

struct JacobianGrid {
  std::size_t time_steps = 0;
  std::size_t depth = 0;
  std::vector<TransitionJacobians> entries;  // row-major over (t, l)

  const TransitionJacobians& at(std::size_t t, std::size_t l) const;
};

JacobianGrid transition_jacobians(const StackRun& run);

// d state(T,L) / d state(t_prime, l) by dynamic programming over the grid;
// t_prime in 0..T, l in 1..L. Shape: state(L) x state(l).
Matrix grid_jacobian(const StackRun& run, const JacobianGrid& grid, std::size_t t_prime,
                     std::size_t l);

// Same quantity by explicit path enumeration; throws SizeError when the
// path count exceeds 1e6.
Matrix brute_force_paths(const StackRun& run, const JacobianGrid& grid, std::size_t t_prime,
                         std::size_t l);

// Long-range derivative profile toward layer 1. jac_norms[t'] is
// ||d state(T,L) / d state(t',1)||_p. carrier[t'] averages that norm over
// all read-out anchors: (1/T) * sum_{t = t'..T} ||d state(t,L) / d state(t',1)||_p,
// the per-origin gradient mass a readout attached to every step would
// accumulate. Two template fits are reported: a binomial-profile fit
// (coefficient c1 against C(dt+1, dl+1) where dt = T-t', dl = L-1) and a
// constant fit (c2, over the oldest quarter of origins). kind names the
// better-fitting template.
struct BoundCurve {
  std::vector<double> jac_norms;
  std::vector<double> carrier;
  double c1 = 0.0;
  double c1_max_rel_dev = 0.0;
  double c2 = 0.0;
  double c2_max_rel_dev = 0.0;
  std::string kind;  // "binomial" or "constant"
};

BoundCurve norm_curve(const StackRun& run, int p);

// Per-sample parameter update assembled from the origin-resolved
// decomposition: delta(theta_l) = sum_{t=1..T} sum_{t'=1..t}
// u(t,t',l) * d state(t',l) / d theta_l, with u propagated through the grid.
// output_grads[t-1] is d loss / d output(t).
CellParams update_decomposition(const StackRun& run, const std::vector<Vec>& output_grads,
                                std::size_t layer);

// Element-wise variance of the decomposed update across a batch of runs,
// averaged per tensor. Throws StatisticsError when the batch has < 2 runs.
std::map<std::string, double> update_variance(const std::vector<StackRun>& batch,
                                              const std::vector<std::vector<Vec>>& output_grads,
                                              std::size_t layer);

}  // namespace lsc
