#pragma once

#include <cmath>
#include <stdexcept>

namespace bcl {

/// Ornstein-Uhlenbeck spatial parameters. Generator (1/2) sigma2 Lap - b x.grad;
/// invariant density mu = N(0, s^2 I) with s^2 = sigma2 / (2b).
struct OUParams {
  double b = 1.0;
  double sigma2 = 1.0;
  int d = 1;

  void validate() const {
    if (!(b > 0)) throw std::invalid_argument("OUParams: b must be > 0");
    if (!(sigma2 > 0)) throw std::invalid_argument("OUParams: sigma2 must be > 0");
    if (d < 1) throw std::invalid_argument("OUParams: d must be >= 1");
  }

  /// Marginal standard deviation of mu per coordinate.
  double stationary_sd() const { return std::sqrt(sigma2 / (2.0 * b)); }
};

}  // namespace bcl
