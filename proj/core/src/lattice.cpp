#include "lsc/lattice.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "lsc/errors.hpp"

namespace lsc {
namespace {

BigInt binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt result = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    result *= BigInt(n - k + i);
    result /= BigInt(i);
  }
  return result;
}

double log_binomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

BigInt path_count(std::size_t dt, std::size_t dl) { return binomial(dt + dl, dt); }

TotalPathBound total_path_bound(std::size_t T, std::size_t dl) {
  if (T == 0) throw RangeError("total chain mass needs T >= 1");
  TotalPathBound out;
  out.closed_form = BigRat(binomial(T + dl + 2, T), BigInt(T));
  BigInt sum = 0;
  for (std::size_t t = 0; t <= T; ++t) {
    for (std::size_t tp = 0; tp <= t; ++tp) {
      sum += binomial(dl + (t - tp), t - tp);
    }
  }
  out.double_sum = BigRat(sum, BigInt(T));
  if (out.closed_form != out.double_sum) {
    throw NumericalError("chain-mass closed form disagrees with the direct sum", 0);
  }
  return out;
}

double total_path_bound_log(std::size_t T, std::size_t dl) {
  if (T == 0) throw RangeError("total chain mass needs T >= 1");
  return log_binomial(double(T + dl + 2), double(T)) - std::log(double(T));
}

GrowthRegime growth_regime(const std::vector<double>& log_values) {
  if (log_values.size() < 10) {
    throw RangeError("growth classification needs >= 10 samples, got " +
                     std::to_string(log_values.size()));
  }
  std::vector<double> diffs;
  diffs.reserve(log_values.size() - 1);
  for (std::size_t i = 1; i < log_values.size(); ++i) {
    diffs.push_back(log_values[i] - log_values[i - 1]);
  }
  double mean = 0.0;
  for (std::size_t i = diffs.size() - 5; i < diffs.size(); ++i) mean += diffs[i];
  mean /= 5.0;
  if (mean <= 0.0) return GrowthRegime::Subexponential;
  double max_dev = 0.0;
  for (std::size_t i = diffs.size() - 5; i < diffs.size(); ++i) {
    max_dev = std::max(max_dev, std::abs(diffs[i] - mean));
  }
  return (max_dev <= 0.05 * mean) ? GrowthRegime::Exponential : GrowthRegime::Subexponential;
}

}  // namespace lsc
