#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "lsc/errors.hpp"
#include "lsc/lattice.hpp"

using namespace lsc;

namespace {

// Independent oracle: count monotone chains by walking every move sequence.
long long enumerate_chains(std::size_t dt, std::size_t dl) {
  if (dt == 0 && dl == 0) return 1;
  long long total = 0;
  if (dt > 0) total += enumerate_chains(dt - 1, dl);
  if (dl > 0) total += enumerate_chains(dt, dl - 1);
  return total;
}

}  // namespace

TEST_CASE("chain counts match direct enumeration") {
  CHECK(path_count(0, 0) == 1);
  CHECK(path_count(1, 1) == 2);
  CHECK(path_count(3, 2) == 10);
  CHECK(path_count(7, 0) == 1);
  CHECK(path_count(0, 4) == 1);

  for (std::size_t dt = 0; dt <= 7; ++dt)
    for (std::size_t dl = 0; dl <= 6; ++dl)
      CHECK(path_count(dt, dl) == BigInt(enumerate_chains(dt, dl)));
}

TEST_CASE("chain counts satisfy the additive recurrence at scale") {
  for (std::size_t dt = 1; dt <= 30; ++dt) {
    for (std::size_t dl = 1; dl <= 30; ++dl) {
      CHECK(path_count(dt, dl) == path_count(dt - 1, dl) + path_count(dt, dl - 1));
      CHECK(path_count(dt, dl) == path_count(dl, dt));
    }
  }
  CHECK(path_count(5, 5) == 252);
  CHECK(path_count(10, 10) == 184756);
  CHECK(path_count(20, 20) == BigInt("137846528820"));
}

TEST_CASE("cumulative chain mass: closed form equals the direct sum") {
  TotalPathBound small = total_path_bound(3, 1);
  CHECK(small.closed_form == BigRat(20, 3));
  CHECK(small.double_sum == BigRat(20, 3));

  TotalPathBound unit = total_path_bound(1, 0);
  CHECK(unit.closed_form == 3);

  // Independent evaluation of the anchored double sum for a few shapes.
  for (std::size_t T : {2, 4, 7}) {
    for (std::size_t dl : {0, 1, 3}) {
      long long sum = 0;
      for (std::size_t t = 0; t <= T; ++t)
        for (std::size_t tp = 0; tp <= t; ++tp) sum += enumerate_chains(t - tp, dl);
      TotalPathBound bound = total_path_bound(T, dl);
      CHECK(bound.double_sum == BigRat(BigInt(sum), BigInt(T)));
      CHECK(bound.closed_form == bound.double_sum);
    }
  }

  for (std::size_t T = 1; T <= 30; ++T)
    for (std::size_t dl = 0; dl <= 30; dl += 3)
      CHECK(total_path_bound(T, dl).closed_form == total_path_bound(T, dl).double_sum);

  CHECK_THROWS_AS(total_path_bound(0, 2), RangeError);
}

TEST_CASE("log form tracks the exact mass and survives huge grids") {
  for (std::size_t T : {1, 3, 10, 25}) {
    for (std::size_t dl : {0, 2, 8}) {
      const double exact =
          std::log(total_path_bound(T, dl).closed_form.convert_to<double>());
      CHECK(total_path_bound_log(T, dl) == doctest::Approx(exact).epsilon(1e-9));
    }
  }
  // Far beyond double-precision binomials, the log form stays finite and
  // monotone in T.
  const double big = total_path_bound_log(100000, 50);
  CHECK(std::isfinite(big));
  CHECK(big > total_path_bound_log(50000, 50));
  CHECK_THROWS_AS(total_path_bound_log(0, 1), RangeError);
}

TEST_CASE("growth classifier separates polynomial from exponential mass") {
  // Depth offset pinned: mass grows polynomially in T.
  std::vector<double> fixed_dl;
  for (std::size_t T = 10; T <= 200; T += 10) fixed_dl.push_back(total_path_bound_log(T, 5));
  CHECK(growth_regime(fixed_dl) == GrowthRegime::Subexponential);

  // Run length pinned: mass grows polynomially in the depth offset.
  std::vector<double> fixed_T;
  for (std::size_t dl = 10; dl <= 200; dl += 10)
    fixed_T.push_back(total_path_bound_log(5, dl));
  CHECK(growth_regime(fixed_T) == GrowthRegime::Subexponential);

  // Depth offset growing with T: the mass turns exponential.
  std::vector<double> joint;
  for (std::size_t T = 10; T <= 200; T += 10) joint.push_back(total_path_bound_log(T, T));
  CHECK(growth_regime(joint) == GrowthRegime::Exponential);

  // Geometrically damped mass decays: negative slope is subexponential.
  std::vector<double> damped;
  for (std::size_t dt = 10; dt <= 200; dt += 10) {
    damped.push_back(double(dt) * std::log(0.5) +
                     std::log(path_count(dt, 5).convert_to<double>()));
  }
  CHECK(growth_regime(damped) == GrowthRegime::Subexponential);

  CHECK_THROWS_AS(growth_regime(std::vector<double>(9, 1.0)), RangeError);
}
