#include "bcl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bcl {

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double kolmogorov_q(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-14) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test_standard_normal(std::span<const double> samples) {
  KsResult res;
  res.n = samples.size();
  if (res.n == 0) return res;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(res.n);
  double d = 0.0;
  for (size_t i = 0; i < sorted.size(); ++i) {
    const double cdf = normal_cdf(sorted[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - cdf;
    const double lo = cdf - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  res.d = d;
  const double sqn = std::sqrt(n);
  res.p_value = kolmogorov_q((sqn + 0.12 + 0.11 / sqn) * d);
  return res;
}

SampleMoments sample_moments(std::span<const double> xs) {
  SampleMoments m;
  m.n = xs.size();
  if (m.n < 2) throw std::invalid_argument("sample_moments: need at least 2 samples");
  const double n = static_cast<double>(m.n);
  double mean = 0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.mean = mean;
  m.variance = m2 * n / (n - 1);
  m.mean_se = std::sqrt(m.variance / n);
  // SE of the sample variance without normality assumptions.
  m.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  const double sd = std::sqrt(m2);
  if (sd > 0) {
    m.skewness = m3 / (sd * sd * sd);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  // Normal-theory SEs, adequate for the 4-sigma diagnostics they feed.
  m.skewness_se = std::sqrt(6.0 / n);
  m.excess_kurtosis_se = std::sqrt(24.0 / n);
  return m;
}

Correlation sample_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw std::invalid_argument("sample_correlation: size mismatch or too few samples");
  Correlation c;
  c.n = xs.size();
  const double n = static_cast<double>(c.n);
  double mx = 0, my = 0;
  for (size_t i = 0; i < c.n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (size_t i = 0; i < c.n; ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx > 0 && syy > 0) c.r = sxy / std::sqrt(sxx * syy);
  c.se = 1.0 / std::sqrt(n);
  return c;
}

}  // namespace bcl
