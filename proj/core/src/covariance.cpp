#include "lsc/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "lsc/errors.hpp"

namespace lsc {
namespace {

LagStat lag_stat(const std::vector<double>& a, std::size_t lag) {
  const std::size_t n = a.size() - lag;
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    m1 += a[i];
    m2 += a[i + lag];
  }
  m1 /= double(n);
  m2 /= double(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = a[i] - m1;
    const double dy = a[i + lag] - m2;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  LagStat stat;
  stat.lag = lag;
  stat.covariance = sxy / double(n - 1);
  if (sxx <= 0.0 || syy <= 0.0) {
    stat.correlation = 0.0;
    stat.p_value = 1.0;
    return stat;
  }
  double r = sxy / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0, 1.0);
  stat.correlation = r;
  const double dof = double(n - 2);
  const double denom = 1.0 - r * r;
  if (denom <= 1e-15) {
    stat.p_value = 0.0;
    return stat;
  }
  const double t = std::abs(r) * std::sqrt(dof / denom);
  boost::math::students_t dist(dof);
  stat.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  return stat;
}

}  // namespace

CovarianceReport decaying_covariance(const std::vector<double>& values, std::size_t max_lag) {
  if (max_lag < 1) throw RangeError("need at least lag 1");
  if (values.size() < max_lag + 3) {
    throw RangeError("series of length " + std::to_string(values.size()) +
                     " too short for max lag " + std::to_string(max_lag) +
                     " (need lag + 3 points)");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("series contains a non-finite value");
  }
  CovarianceReport report;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  report.constant_series = (*lo == *hi);

  std::vector<double> squares(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) squares[i] = values[i] * values[i];
  for (std::size_t lag = 1; lag <= max_lag; ++lag) {
    report.linear.push_back(lag_stat(values, lag));
    report.squared.push_back(lag_stat(squares, lag));
  }
  return report;
}

}  // namespace lsc
