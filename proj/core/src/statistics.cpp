#include "ehom/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ehom/errors.hpp"

namespace ehom {

double mean(std::span<const double> v) {
  if (v.empty()) {
    throw StatisticsError("mean of an empty sample");
  }
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) {
    throw StatisticsError("median of an empty sample");
  }
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) {
    return v[mid];
  }
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) {
    throw StatisticsError("variance needs at least two samples");
  }
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) {
    s += (x - m) * (x - m);
  }
  return s / static_cast<double>(v.size() - 1);
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw StatisticsError("slope fit needs at least two paired points");
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) {
    throw StatisticsError("slope fit with degenerate abscissae");
  }
  return sxy / sxx;
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_tail(double t) {
  if (t < 0.2) {
    return 1.0;
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * t * t);
    sum += sign * term;
    if (term < 1e-17) {
      break;
    }
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_standard_normal(std::vector<double> sample) {
  if (sample.empty()) {
    throw StatisticsError("KS test on an empty sample");
  }
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = standard_normal_cdf(sample[i]);
    dmax = std::max({dmax, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double en = std::sqrt(n);
  return {dmax, kolmogorov_tail((en + 0.12 + 0.11 / en) * dmax)};
}

} // namespace ehom
