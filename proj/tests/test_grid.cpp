#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

#include "lsc/backprop.hpp"
#include "lsc/covariance.hpp"
#include "lsc/eigen.hpp"
#include "lsc/errors.hpp"
#include "lsc/grid.hpp"
#include "lsc/matrix.hpp"
#include "lsc/rng.hpp"
#include "lsc/stack.hpp"

using namespace lsc;

namespace {

Vec random_vec(std::size_t n, RandomSource& rng, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

std::vector<Vec> random_inputs(std::size_t T, std::size_t channels, RandomSource& rng) {
  std::vector<Vec> inputs;
  for (std::size_t t = 0; t < T; ++t) inputs.push_back(random_vec(channels, rng, 0.5));
  return inputs;
}

StackRun random_run(const StackConfig& config, std::size_t T, RandomSource& rng) {
  auto params = init_stack_params(config, rng);
  return stack_forward(config, params, random_inputs(T, config.channels(), rng));
}

StackConfig uniform_stack(CellType type, std::size_t depth, std::size_t width,
                          double rho = 1.0) {
  StackConfig config;
  for (std::size_t l = 0; l < depth; ++l) {
    CellSpec spec;
    spec.type = type;
    spec.width = width;
    spec.input_width = width;
    spec.rho = rho;
    config.layers.push_back(spec);
  }
  return config;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  return worst;
}

double binom(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double out = 1.0;
  for (std::size_t i = 0; i < k; ++i) out = out * double(n - i) / double(i + 1);
  return out;
}

}  // namespace

TEST_CASE("transition entries carry their own radii and norms") {
  RandomSource rng(31);
  StackConfig config = uniform_stack(CellType::Gru, 2, 3);
  StackRun run = random_run(config, 4, rng);
  JacobianGrid grid = transition_jacobians(run);
  CHECK(grid.time_steps == 4);
  CHECK(grid.depth == 2);
  REQUIRE(grid.entries.size() == 8);

  for (std::size_t t = 1; t <= 4; ++t) {
    for (std::size_t l = 1; l <= 2; ++l) {
      const TransitionJacobians& e = grid.at(t, l);
      CHECK(e.t == t);
      CHECK(e.l == l);
      CHECK(e.rho_time ==
            doctest::Approx(spectral_radius(e.time_jac.leading_square())).epsilon(1e-12));
      CHECK(e.rho_depth ==
            doctest::Approx(spectral_radius(e.depth_jac.leading_square())).epsilon(1e-12));
      const int ps[3] = {1, 2, 0};
      for (int k = 0; k < 3; ++k) {
        CHECK(e.a_time[k] == doctest::Approx(induced_norm(e.time_jac, ps[k])).epsilon(1e-12));
        CHECK(e.a_depth[k] == doctest::Approx(induced_norm(e.depth_jac, ps[k])).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(grid.at(0, 1), RangeError);
  CHECK_THROWS_AS(grid.at(1, 3), RangeError);
}

TEST_CASE("grid recursion ends at the identity") {
  RandomSource rng(37);
  StackRun run = random_run(uniform_stack(CellType::SimpleRnn, 3, 2), 5, rng);
  JacobianGrid grid = transition_jacobians(run);
  Matrix base = grid_jacobian(run, grid, 5, 3);
  CHECK(max_abs_diff(base, Matrix::identity(2)) == 0.0);
  // No path gains depth without spending time.
  CHECK(grid_jacobian(run, grid, 5, 1).max_abs() == 0.0);
}

TEST_CASE("geometric stack reproduces the weighted path count") {
  const double rho = 0.5;
  const std::size_t T = 6, L = 3, width = 2;
  RandomSource rng(41);
  StackRun run = random_run(uniform_stack(CellType::PascalRnn, L, width, rho), T, rng);
  JacobianGrid grid = transition_jacobians(run);

  for (std::size_t tp = 0; tp <= T; ++tp) {
    for (std::size_t l = 1; l <= L; ++l) {
      const double dt = double(T - tp);
      const std::size_t dl = L - l;
      const double coeff = std::pow(rho, dt) * binom(std::size_t(dt), dl);
      Matrix expected = Matrix::identity(width);
      for (double& v : expected.data()) v *= coeff;
      CHECK(max_abs_diff(grid_jacobian(run, grid, tp, l), expected) < 1e-12);
    }
  }
}

TEST_CASE("two-step corner assembles both orderings") {
  RandomSource rng(43);
  StackRun run = random_run(uniform_stack(CellType::SimpleRnn, 2, 3), 4, rng);
  JacobianGrid grid = transition_jacobians(run);
  const std::size_t T = 4, L = 2;

  // Pure time corridor: product of the layer-L time Jacobians.
  Matrix chain = grid.at(T, L).time_jac * grid.at(T - 1, L).time_jac;
  CHECK(max_abs_diff(grid_jacobian(run, grid, T - 2, L), chain) < 1e-12);

  // One depth hop over two steps: depth-then-time plus time-then-depth.
  Matrix both = grid.at(T, L).depth_jac * grid.at(T - 1, L - 1).time_jac +
                grid.at(T, L).time_jac * grid.at(T - 1, L).depth_jac;
  CHECK(max_abs_diff(grid_jacobian(run, grid, T - 2, L - 1), both) < 1e-12);
}

TEST_CASE("dynamic programming agrees with explicit path enumeration") {
  RandomSource rng(47);
  std::vector<StackConfig> configs;
  configs.push_back(uniform_stack(CellType::PascalRnn, 4, 2, 0.8));
  configs.push_back(uniform_stack(CellType::SimpleRnn, 3, 3));
  configs.push_back(uniform_stack(CellType::Gru, 3, 2));
  configs.push_back(uniform_stack(CellType::Lstm, 2, 3));
  configs.push_back(uniform_stack(CellType::Alif, 3, 2));

  for (const StackConfig& config : configs) {
    const std::size_t T = 8;
    StackRun run = random_run(config, T, rng);
    JacobianGrid grid = transition_jacobians(run);
    for (std::size_t tp = 0; tp <= T; ++tp) {
      for (std::size_t l = 1; l <= config.depth(); ++l) {
        CHECK(max_abs_diff(grid_jacobian(run, grid, tp, l),
                           brute_force_paths(run, grid, tp, l)) < 1e-10);
      }
    }
  }
}

TEST_CASE("path enumeration refuses combinatorial blowups") {
  RandomSource rng(53);
  StackRun run = random_run(uniform_stack(CellType::PascalRnn, 16, 1, 0.5), 30, rng);
  JacobianGrid grid = transition_jacobians(run);
  CHECK_THROWS_AS(brute_force_paths(run, grid, 0, 1), SizeError);
  // The dynamic program handles the same query without trouble.
  Matrix dp = grid_jacobian(run, grid, 0, 1);
  CHECK(dp(0, 0) == doctest::Approx(std::pow(0.5, 30) * binom(30, 15)).epsilon(1e-9));
}

TEST_CASE("norm profile of the geometric stack matches the closed form") {
  const std::size_t T = 8, L = 3;
  RandomSource rng(59);

  for (double rho : {1.0, 0.5}) {
    StackRun run = random_run(uniform_stack(CellType::PascalRnn, L, 1, rho), T, rng);
    BoundCurve curve = norm_curve(run, 2);
    REQUIRE(curve.jac_norms.size() == T + 1);
    REQUIRE(curve.carrier.size() == T + 1);

    for (std::size_t tp = 0; tp <= T; ++tp) {
      const double expected = std::pow(rho, double(T - tp)) * binom(T - tp, L - 1);
      CHECK(curve.jac_norms[tp] == doctest::Approx(expected).epsilon(1e-9));
      double mass = 0.0;
      for (std::size_t anchor = tp; anchor <= T; ++anchor)
        mass += std::pow(rho, double(anchor - tp)) * binom(anchor - tp, L - 1);
      CHECK(curve.carrier[tp] == doctest::Approx(mass / double(T)).epsilon(1e-9));
    }

    if (rho == 1.0) {
      // Hockey-stick identity: the carrier IS the binomial template.
      CHECK(curve.kind == "binomial");
      CHECK(curve.c1 == doctest::Approx(1.0 / double(T)).epsilon(1e-9));
      CHECK(curve.c1_max_rel_dev < 1e-9);
    }
  }

  CHECK_THROWS_AS(norm_curve(StackRun{}, 2), RangeError);
}

TEST_CASE("origin-resolved updates reassemble the reverse-mode gradient") {
  RandomSource rng(61);
  std::vector<StackConfig> configs;
  configs.push_back(uniform_stack(CellType::PascalRnn, 3, 2, 0.9));
  configs.push_back(uniform_stack(CellType::SimpleRnn, 3, 3));
  configs.push_back(uniform_stack(CellType::Gru, 2, 3));
  configs.push_back(uniform_stack(CellType::Lstm, 2, 2));
  configs.push_back(uniform_stack(CellType::Alif, 2, 3));

  for (StackConfig& config : configs) {
    const std::size_t T = 5;
    // Exercise the readout path on half the configs.
    if (config.depth() == 2) {
      RandomSource ro(7);
      Matrix readout(4, config.layers.back().width);
      for (double& v : readout.data()) v = 0.3 * ro.normal();
      config.readout = readout;
    }
    StackRun run = random_run(config, T, rng);
    std::vector<Vec> output_grads;
    for (std::size_t t = 0; t < T; ++t)
      output_grads.push_back(random_vec(config.output_size(), rng));

    StackGradients reference = reverse_gradient(run, output_grads);
    for (std::size_t layer = 1; layer <= config.depth(); ++layer) {
      CellParams decomposed = update_decomposition(run, output_grads, layer);
      REQUIRE(decomposed.tensors.size() == reference.layers[layer - 1].tensors.size());
      for (std::size_t ti = 0; ti < decomposed.tensors.size(); ++ti) {
        CHECK(max_abs_diff(decomposed.tensors[ti].value,
                           reference.layers[layer - 1].tensors[ti].value) < 1e-8);
      }
    }
  }
}

TEST_CASE("update variance bookkeeping") {
  RandomSource rng(67);
  StackConfig config = uniform_stack(CellType::PascalRnn, 2, 1, 1.0);
  auto params = init_stack_params(config, rng);

  std::vector<StackRun> batch;
  std::vector<std::vector<Vec>> grads;
  for (int b = 0; b < 4; ++b) {
    batch.push_back(stack_forward(config, params, random_inputs(6, 1, rng)));
    std::vector<Vec> g;
    for (int t = 0; t < 6; ++t) g.push_back(random_vec(1, rng));
    grads.push_back(g);
  }

  CHECK_THROWS_AS(update_variance({batch[0]}, {grads[0]}, 1), StatisticsError);

  auto zero_grads = grads;
  for (auto& g : zero_grads)
    for (auto& v : g) v.assign(v.size(), 0.0);
  for (auto& [name, var] : update_variance(batch, zero_grads, 1)) CHECK(var == 0.0);

  auto var1 = update_variance(batch, grads, 1);
  REQUIRE(var1.count("rho") == 1);
  CHECK(var1.at("rho") > 0.0);
}

TEST_CASE("update variance grows faster at the edge of stability") {
  // Same inputs and output gradients through two stacks that differ only in
  // the transition coefficient: at coefficient 1 the long-range terms pile
  // up combinatorially, at 1/2 they are geometrically damped.
  const std::size_t T = 12;
  auto batch_variance = [&](double rho) {
    RandomSource rng(71);
    StackConfig config = uniform_stack(CellType::PascalRnn, 2, 1, rho);
    auto params = init_stack_params(config, rng);
    std::vector<StackRun> batch;
    std::vector<std::vector<Vec>> grads;
    for (int b = 0; b < 8; ++b) {
      batch.push_back(stack_forward(config, params, random_inputs(T, 1, rng)));
      std::vector<Vec> g;
      for (std::size_t t = 0; t < T; ++t) g.push_back(random_vec(1, rng));
      grads.push_back(g);
    }
    return update_variance(batch, grads, 1).at("rho");
  };
  CHECK(batch_variance(1.0) > 10.0 * batch_variance(0.5));
}

TEST_CASE("lagged covariance separates white, persistent and constant series") {
  RandomSource rng(73);

  std::vector<double> white;
  for (int i = 0; i < 4000; ++i) white.push_back(rng.normal());
  CovarianceReport iid = decaying_covariance(white, 5);
  CHECK_FALSE(iid.constant_series);
  REQUIRE(iid.linear.size() == 5);
  REQUIRE(iid.squared.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(iid.linear[k].lag == k + 1);
    CHECK(std::fabs(iid.linear[k].correlation) < 0.06);
    CHECK(std::fabs(iid.squared[k].correlation) < 0.06);
  }

  std::vector<double> ar{0.0};
  for (int i = 0; i < 4000; ++i) ar.push_back(0.9 * ar.back() + rng.normal());
  CovarianceReport persistent = decaying_covariance(ar, 5);
  CHECK(persistent.linear[0].correlation > 0.85);
  CHECK(persistent.linear[0].correlation < 0.95);
  CHECK(persistent.linear[2].correlation < persistent.linear[0].correlation);
  CHECK(persistent.linear[0].p_value < 1e-10);
  CHECK(persistent.linear[0].covariance > 0.0);

  CovarianceReport flat = decaying_covariance(std::vector<double>(50, 2.5), 3);
  CHECK(flat.constant_series);
  for (const LagStat& s : flat.linear) {
    CHECK(s.correlation == 0.0);
    CHECK(s.p_value == 1.0);
  }

  CHECK_THROWS_AS(decaying_covariance({1.0, 2.0, 3.0}, 5), RangeError);
  CHECK_THROWS_AS(decaying_covariance(white, 0), RangeError);
}
