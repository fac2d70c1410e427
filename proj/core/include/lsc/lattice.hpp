#pragma once

#include <cstddef>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace lsc {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

// Monotone lattice chains spanning dt time steps and dl depth steps:
// C(dt + dl, dt). Exact for any size.
BigInt path_count(std::size_t dt, std::size_t dl);

// Cumulative chain mass for a length-T run at depth offset dl, averaged over
// anchors: (1/T) * sum_{t=0..T} sum_{t'=0..t} C(dl + (t - t'), t - t').
// closed_form is (1/T) * C(T + dl + 2, T); double_sum evaluates the sum
// directly. The two always agree; both are returned so callers can assert it.
struct TotalPathBound {
  BigRat closed_form;
  BigRat double_sum;
};

TotalPathBound total_path_bound(std::size_t T, std::size_t dl);

// log of the closed form, for grids where the exact value overflows double.
double total_path_bound_log(std::size_t T, std::size_t dl);

enum class GrowthRegime { Subexponential, Exponential };

// Classifies a log-value series: exponential growth shows a stabilising
// positive slope (last five increments within 5% of their mean), anything
// else is subexponential. Needs >= 10 samples.
GrowthRegime growth_regime(const std::vector<double>& log_values);

}  // namespace lsc
