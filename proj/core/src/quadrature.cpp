#include "bcl/quadrature.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bcl {

GaussHermiteRule GaussHermiteRule::make(int order) {
  if (order < 1) throw std::invalid_argument("GaussHermiteRule: order must be >= 1");
  GaussHermiteRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  if (order == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = std::sqrt(M_PI);
    return rule;
  }
  // Jacobi matrix of the (physicists') Hermite recurrence: diag 0,
  // off-diagonal sqrt(i/2).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(order);
  Eigen::VectorXd sub(order - 1);
  for (int i = 1; i < order; ++i) sub[i - 1] = std::sqrt(0.5 * i);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("GaussHermiteRule: eigensolver failed");

  // Orthonormal (physicists') Hermite values p_0..p_n at x; returns p_n'.
  // Weights via the Christoffel function, w_i = 1 / sum_k p_k(x_i)^2: the
  // eigenvector route loses the extreme weights (~e^{-x_i^2}) to round-off.
  const int n = order;
  std::vector<double> p(n + 1);
  auto eval = [&](double x) {
    p[0] = std::pow(M_PI, -0.25);
    if (n >= 1) p[1] = std::sqrt(2.0) * x * p[0];
    for (int k = 1; k < n; ++k)
      p[k + 1] = (std::sqrt(2.0) * x * p[k] - std::sqrt(static_cast<double>(k)) * p[k - 1]) /
                 std::sqrt(static_cast<double>(k + 1));
    return std::sqrt(2.0 * n) * p[n - 1];  // derivative of p_n
  };

  for (int i = 0; i < order; ++i) {
    double x = es.eigenvalues()[i];
    for (int it = 0; it < 3; ++it) {  // Newton polish on p_n
      const double dp = eval(x);
      x -= p[n] / dp;
    }
    eval(x);
    double chr = 0.0;
    for (int k = 0; k < n; ++k) chr += p[k] * p[k];
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / chr;
  }
  return rule;
}

MuQuadrature::MuQuadrature(const OUParams& ou, int order_per_dim) {
  ou.validate();
  if (order_per_dim < 1) throw std::invalid_argument("MuQuadrature: order must be >= 1");
  if (ou.d > 3)
    throw std::invalid_argument("MuQuadrature: tensor quadrature supported for d <= 3");
  dim_ = ou.d;
  const GaussHermiteRule rule = GaussHermiteRule::make(order_per_dim);
  const double scale = std::sqrt(2.0) * ou.stationary_sd();
  const double wnorm = 1.0 / std::sqrt(M_PI);

  size_t total = 1;
  for (int k = 0; k < dim_; ++k) total *= static_cast<size_t>(order_per_dim);
  points_.resize(total * dim_);
  weights_.resize(total);
  std::vector<size_t> idx(dim_, 0);
  for (size_t q = 0; q < total; ++q) {
    double w = 1.0;
    for (int k = 0; k < dim_; ++k) {
      points_[q * dim_ + k] = scale * rule.nodes[idx[k]];
      w *= wnorm * rule.weights[idx[k]];
    }
    weights_[q] = w;
    for (int k = 0; k < dim_; ++k) {
      if (++idx[k] < static_cast<size_t>(order_per_dim)) break;
      idx[k] = 0;
    }
  }
}

double MuQuadrature::integrate(const std::function<double(const double*)>& f) const {
  double acc = 0.0;
  for (size_t q = 0; q < size(); ++q) acc += weights_[q] * f(point(q));
  return acc;
}

double MuQuadrature::dot(const std::vector<double>& a, const std::vector<double>& b) const {
  double acc = 0.0;
  for (size_t q = 0; q < size(); ++q) acc += weights_[q] * a[q] * b[q];
  return acc;
}

std::vector<double> MuQuadrature::sample(
    const std::function<double(const double*)>& f) const {
  std::vector<double> vals(size());
  for (size_t q = 0; q < size(); ++q) vals[q] = f(point(q));
  return vals;
}

namespace {

double simpson(double fa, double fm, double fb, double h) {
  return h / 6.0 * (fa + 4.0 * fm + fb);
}

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   double floor, int depth, int max_depth, double* err_acc) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * std::max(tol, floor)) {
    if (err_acc) *err_acc += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  if (depth >= max_depth) {
    std::ostringstream os;
    os << "adaptive_simpson: panel cap exceeded; last two estimates " << whole
       << " and " << (left + right);
    throw std::runtime_error(os.str());
  }
  return simpson_rec(f, a, m, fa, flm, fm, left, tol * 0.5, floor, depth + 1, max_depth,
                     err_acc) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol * 0.5, floor, depth + 1, max_depth,
                     err_acc);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol, int max_depth, double* err_out) {
  if (err_out) *err_out = 0.0;
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = simpson(fa, fm, fb, b - a);
  // absolute floor keeps round-off-level panels from subdividing forever
  const double scale =
      std::max({std::abs(whole), std::abs(fa) * std::abs(b - a), 1e-300});
  return simpson_rec(f, a, b, fa, fm, fb, whole, rel_tol * scale, 1e-15 * scale, 0,
                     max_depth, err_out);
}

}  // namespace bcl
