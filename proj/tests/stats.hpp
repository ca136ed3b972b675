#pragma once

// Goodness-of-fit helpers for distribution tests. Thresholds are at the
// 0.1% level so a correct sampler fails about once in a thousand seeds.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace stats {

inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  double s = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    double d = observed[k] - expected[k];
    s += d * d / expected[k];
  }
  return s;
}

/// Upper 0.1% point of chi-square with `df` degrees of freedom
/// (Wilson-Hilferty approximation).
inline double chi_square_critical(double df) {
  constexpr double z = 3.0902;  // upper 0.1% normal quantile
  double a = 2.0 / (9.0 * df);
  double c = 1.0 - a + z * std::sqrt(a);
  return df * c * c * c;
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  double n = static_cast<double>(xs.size()), d = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    double f = cdf(xs[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - f, f - static_cast<double>(k) / n});
  }
  return d;
}

/// Asymptotic 0.1% critical value of the KS statistic.
inline double ks_critical(std::size_t n) { return 1.9495 / std::sqrt(static_cast<double>(n)); }

inline double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace stats
