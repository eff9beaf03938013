#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "bcl/ou.hpp"

namespace bcl {

/// Gauss-Hermite rule for weight e^{-u^2} on R (Golub-Welsch).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // sum to sqrt(pi)
  static GaussHermiteRule make(int order);
};

/// Tensor quadrature integrating against the OU invariant measure
/// mu = N(0, s^2 I_d); weights sum to 1.
class MuQuadrature {
 public:
  MuQuadrature() = default;
  MuQuadrature(const OUParams& ou, int order_per_dim);

  size_t size() const { return weights_.size(); }
  int dim() const { return dim_; }
  const double* point(size_t q) const { return points_.data() + q * dim_; }
  double weight(size_t q) const { return weights_[q]; }
  const std::vector<double>& weights() const { return weights_; }

  double integrate(const std::function<double(const double*)>& f) const;

  /// Integral of the product of sampled node values, sum_q w_q a_q b_q.
  double dot(const std::vector<double>& a, const std::vector<double>& b) const;

  /// Sample f at all nodes.
  std::vector<double> sample(const std::function<double(const double*)>& f) const;

 private:
  int dim_ = 0;
  std::vector<double> points_;   // flattened, dim-major per node
  std::vector<double> weights_;
};

/// Adaptive Simpson on [a, b]. Returns the estimate; *err_out (optional)
/// receives the final error estimate. Throws on panel-cap overflow with the
/// last two estimates in the message.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, int max_depth, double* err_out = nullptr);

}  // namespace bcl
