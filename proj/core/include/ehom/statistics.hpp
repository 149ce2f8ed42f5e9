#pragma once

#include <span>
#include <vector>

namespace ehom {

double mean(std::span<const double> v);
double median(std::vector<double> v);
/// Unbiased sample variance.
double sample_variance(std::span<const double> v);

/// Slope of the ordinary least-squares line through (x, y).
double least_squares_slope(std::span<const double> x, std::span<const double> y);

double standard_normal_cdf(double x);

/// Asymptotic Kolmogorov tail Q(t) = 2 sum (-1)^(j-1) exp(-2 j^2 t^2).
double kolmogorov_tail(double t);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// One-sample Kolmogorov-Smirnov test of `sample` against N(0, 1).
KsResult ks_test_standard_normal(std::vector<double> sample);

} // namespace ehom
