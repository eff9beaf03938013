#pragma once

#include <cstddef>
#include <span>

namespace bcl {

double normal_cdf(double x);

/// Asymptotic Kolmogorov distribution Q(lambda) = 2 sum (-1)^{j-1} e^{-2 j^2 lambda^2}.
double kolmogorov_q(double lambda);

struct KsResult {
  double d = 0;        // sup |F_n - F|
  double p_value = 1;  // asymptotic, Stephens-corrected
  size_t n = 0;
};

/// One-sample KS test of `samples` against N(0,1).
KsResult ks_test_standard_normal(std::span<const double> samples);

struct SampleMoments {
  size_t n = 0;
  double mean = 0, mean_se = 0;
  double variance = 0, variance_se = 0;  // unbiased variance; SE via 4th moment
  double skewness = 0, skewness_se = 0;
  double excess_kurtosis = 0, excess_kurtosis_se = 0;
};

SampleMoments sample_moments(std::span<const double> xs);

struct Correlation {
  double r = 0, se = 0;
  size_t n = 0;
};

Correlation sample_correlation(std::span<const double> xs, std::span<const double> ys);

}  // namespace bcl
