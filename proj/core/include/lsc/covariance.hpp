#pragma once

#include <cstddef>
#include <vector>

namespace lsc {

struct LagStat {
  std::size_t lag = 0;
  double covariance = 0.0;
  double correlation = 0.0;
  double p_value = 1.0;  // two-sided, against zero correlation
};

// Lagged self-covariance of a scalar series and of its squares. For lag k the
// pairs are (a_t, a_{t+k}); correlation is Pearson over the two overlapping
// windows, the p-value comes from t = r * sqrt((n-2)/(1-r^2)) with n-2
// degrees of freedom. A globally constant series is flagged, with
// correlations reported as 0.
struct CovarianceReport {
  std::vector<LagStat> linear;
  std::vector<LagStat> squared;
  bool constant_series = false;
};

CovarianceReport decaying_covariance(const std::vector<double>& values, std::size_t max_lag);

}  // namespace lsc
