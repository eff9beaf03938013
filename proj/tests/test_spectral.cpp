#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <limits>

#include "bcl/spectral.hpp"

using namespace bcl;

namespace {

/// Largest principal angle between the spans of two pair-index ranges,
/// computed from the SVD of the cross-Gram matrix under the basis quadrature.
double max_principal_angle(const SpectralBasis& a, int level_a, const SpectralBasis& b,
                           int level_b) {
  REQUIRE(a.mult[level_a] == b.mult[level_b]);
  const int m = a.mult[level_a];
  Eigen::MatrixXd g(m, m);
  const auto& quad = a.quad();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      g(i, j) = quad.dot(a.pair_node_values(a.pair_index(level_a, i)),
                         b.pair_node_values(b.pair_index(level_b, j)));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
  const double smin = svd.singularValues()(m - 1);
  return std::acos(std::clamp(smin, 0.0, 1.0));
}

}  // namespace

TEST_CASE("Gauss-Hermite rule integrates gaussian moments exactly") {
  const OUParams ou{1.0, 1.0, 1};
  MuQuadrature quad(ou, 128);
  const double s2 = ou.stationary_sd() * ou.stationary_sd();

  double w = 0, m2 = 0, m10 = 0, m20 = 0;
  for (size_t q = 0; q < quad.size(); ++q) {
    const double x = quad.point(q)[0];
    w += quad.weight(q);
    m2 += quad.weight(q) * x * x;
    m10 += quad.weight(q) * std::pow(x, 10);
    m20 += quad.weight(q) * std::pow(x, 20);
  }
  CHECK(std::abs(w - 1.0) < 1e-12);  // integral of mu is 1
  CHECK(m2 == doctest::Approx(s2).epsilon(1e-13));
  CHECK(m10 == doctest::Approx(945.0 * std::pow(s2, 5)).epsilon(1e-12));
  // (2k-1)!! for k=10 is 654729075
  CHECK(m20 == doctest::Approx(654729075.0 * std::pow(s2, 10)).epsilon(1e-12));
}

TEST_CASE("orthonormal hermite recurrence against explicit polynomials") {
  for (double u : {-2.3, -0.4, 0.0, 0.9, 3.7}) {
    double e[6];
    hermite_orthonormal(u, 5, std::span<double>(e, 6));
    CHECK(e[0] == doctest::Approx(1.0));
    CHECK(e[1] == doctest::Approx(u));
    CHECK(e[2] == doctest::Approx((u * u - 1) / std::sqrt(2.0)).epsilon(1e-13));
    CHECK(e[3] == doctest::Approx((u * u * u - 3 * u) / std::sqrt(6.0)).epsilon(1e-13));
    CHECK(e[4] ==
          doctest::Approx((std::pow(u, 4) - 6 * u * u + 3) / std::sqrt(24.0)).epsilon(1e-12));
  }
}

TEST_CASE("closed-form spectrum: zero potential") {
  auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 0.0, 6);
  for (int k = 0; k < 6; ++k) {
    CHECK(basis->lambda[k] == doctest::Approx(double(k)));
    CHECK(basis->mult[k] == 1);
  }
  // phi_1 is identically 1
  for (double x : {-1.7, 0.0, 2.3}) CHECK(basis->eval_pair(0, &x) == doctest::Approx(1.0));
}

TEST_CASE("closed-form spectrum: constant alpha shifts and criticality") {
  auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 2.0, 4);
  CHECK(basis->lambda[0] == doctest::Approx(-2.0));
  CHECK(basis->lambda[1] == doctest::Approx(-1.0));
  CHECK(basis->lambda[2] == doctest::Approx(0.0));
  CHECK(2 * basis->lambda[1] == doctest::Approx(basis->lambda[0]));  // level-2 critical
}

TEST_CASE("closed-form multiplicities count multi-indices") {
  auto d2 = closed_form_spectrum(OUParams{1, 1, 2}, 0.0, 6, 48);
  for (int k = 0; k < 6; ++k) CHECK(d2->mult[k] == k + 1);
  auto d3 = closed_form_spectrum(OUParams{1, 1, 3}, 0.0, 5, 16);
  const int expect3[] = {1, 3, 6, 10, 15};
  for (int k = 0; k < 5; ++k) CHECK(d3->mult[k] == expect3[k]);
}

TEST_CASE("closed form rejects K_max < 1") {
  CHECK_THROWS_AS(closed_form_spectrum(OUParams{1, 1, 1}, 0.0, 0), std::invalid_argument);
}

TEST_CASE("basis orthonormality under the module quadrature") {
  for (int d : {1, 2}) {
    auto basis = closed_form_spectrum(OUParams{0.7, 1.3, d}, 0.5, d == 1 ? 8 : 5,
                                      d == 1 ? 128 : 64);
    const auto& quad = basis->quad();
    double max_dev = 0;
    for (int p = 0; p < basis->pairs(); ++p)
      for (int r = p; r < basis->pairs(); ++r) {
        const double ip = quad.dot(basis->pair_node_values(p), basis->pair_node_values(r));
        max_dev = std::max(max_dev, std::abs(ip - (p == r ? 1.0 : 0.0)));
      }
    CHECK(max_dev <= 1e-10);
  }
}

TEST_CASE("galerkin with constant alpha reproduces the closed form") {
  const OUParams ou{1, 1, 1};
  auto cf = closed_form_spectrum(ou, 2.0, 5);
  auto gk = galerkin_spectrum(ou, [](const double*) { return 2.0; }, 40, 5);
  CHECK(gk->galerkin_max_residual <= 1e-8);
  for (int k = 0; k < 5; ++k) {
    CHECK(std::abs(gk->lambda[k] - cf->lambda[k]) <= 1e-8);
    CHECK(gk->mult[k] == cf->mult[k]);
    CHECK(max_principal_angle(*gk, k, *cf, k) <= 1e-6);
  }
}

TEST_CASE("galerkin with degenerate levels clusters multiplicities (d=2)") {
  const OUParams ou{1, 1, 2};
  auto cf = closed_form_spectrum(ou, 1.0, 4, 64);
  GalerkinOptions opts;
  opts.quad_order = 64;
  auto gk = galerkin_spectrum(ou, [](const double*) { return 1.0; }, 10, 4, opts);
  for (int k = 0; k < 4; ++k) {
    CHECK(gk->mult[k] == cf->mult[k]);
    CHECK(std::abs(gk->lambda[k] - cf->lambda[k]) <= 1e-8);
    CHECK(max_principal_angle(*gk, k, *cf, k) <= 1e-6);
  }
}

TEST_CASE("galerkin with zero potential has lambda1 = 0 and flat phi_1") {
  auto gk = galerkin_spectrum(OUParams{1, 1, 1}, [](const double*) { return 0.0; }, 30, 3);
  CHECK(std::abs(gk->lambda[0]) <= 1e-8);
  for (double x : {-1.2, 0.0, 0.7, 2.1})
    CHECK(gk->eval_pair(0, &x) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("galerkin ground state of a gaussian bump potential") {
  const OUParams ou{1, 1, 1};
  auto spectrum_for = [&](double c) {
    return galerkin_spectrum(
        ou, [c](const double* x) { return c * std::exp(-x[0] * x[0]); }, 40, 4);
  };
  auto g_half = spectrum_for(0.5);
  auto g_one = spectrum_for(1.0);
  CHECK(g_half->lambda[0] < 0.0);
  CHECK(g_half->lambda[0] > -0.5);
  CHECK(g_one->lambda[0] < 0.0);
  CHECK(g_one->lambda[0] > -1.0);
  // Rayleigh monotonicity: larger potential pushes lambda_1 down
  CHECK(g_one->lambda[0] < g_half->lambda[0]);
  // phi_1 sign convention
  double zero = 0.0;
  CHECK(g_one->eval_pair(0, &zero) > 0.0);
}

TEST_CASE("galerkin rejects unbounded alpha samples") {
  CHECK_THROWS_WITH_AS(
      galerkin_spectrum(OUParams{1, 1, 1},
                        [](const double* x) { return 1e6 * x[0] * x[0]; }, 20, 3),
      doctest::Contains("unbounded"), std::invalid_argument);
}

TEST_CASE("inner product: normalization, orthogonality, derived value") {
  const OUParams ou{1, 1, 1};
  auto basis = closed_form_spectrum(ou, 0.0, 4);
  auto phi = [&](int p) {
    return [basis, p](const double* x) { return basis->eval_pair(p, x); };
  };
  CHECK(inner_product(phi(0), phi(0), ou) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(inner_product(phi(1), phi(2), ou)) < 1e-12);
  auto lin = [](const double* x) { return std::sqrt(2.0) * x[0]; };
  CHECK(inner_product(lin, lin, ou) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("inner product rejects non-finite samples naming the node") {
  const OUParams ou{1, 1, 1};
  auto bad = [](const double*) { return std::numeric_limits<double>::quiet_NaN(); };
  auto one = [](const double*) { return 1.0; };
  CHECK_THROWS_WITH_AS(inner_product(bad, one, ou), doctest::Contains("non-finite"),
                       std::invalid_argument);
}

TEST_CASE("expand: eigenfunctions, gamma, and the x^4 example") {
  auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 0.0, 8);

  auto e1 = expand([&](const double* x) { return basis->eval_pair(0, x); }, basis);
  CHECK(e1.gamma_level == 0);
  CHECK(e1.coeffs[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e1.residual_l2 < 1e-10);

  auto e2 = expand(
      [&](const double* x) { return 3 * basis->eval_pair(1, x) + basis->eval_pair(4, x); },
      basis);
  CHECK(e2.gamma_level == 1);
  const auto e2s = split(e2);
  CHECK(e2s.split->level_gamma.coeffs[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(e2s.split->level_gamma.norm_l2 == doctest::Approx(3.0).epsilon(1e-12));

  // f(x) = x^4 under mu = N(0, 1/2): a_1 = 3 s^4 = 3/4, plus degree-2 and
  // degree-4 components 3 sqrt(2)/2 and sqrt(6)/2
  auto e4 = expand([](const double* x) { return std::pow(x[0], 4); }, basis);
  CHECK(e4.gamma_level == 0);
  CHECK(e4.coeffs[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(e4.coeffs[2] == doctest::Approx(3.0 * std::sqrt(2.0) / 2.0).epsilon(1e-12));
  CHECK(e4.coeffs[4] == doctest::Approx(std::sqrt(6.0) / 2.0).epsilon(1e-12));
  CHECK(e4.residual_l2 < 1e-10);
  CHECK(!e4.truncation_warning);

  // Parseval: ||x^4||^2 = 105/16
  double sum2 = 0;
  for (double c : e4.coeffs) sum2 += c * c;
  CHECK(sum2 + e4.residual_l2 * e4.residual_l2 ==
        doctest::Approx(105.0 / 16.0).epsilon(1e-12));
}

TEST_CASE("expansion residual decreases with K_max and warns when truncated") {
  auto f = [](const double* x) { return std::pow(x[0], 4); };
  double prev = 1e300;
  for (int k_max : {2, 3, 4, 5}) {
    auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 0.0, k_max);
    auto e = expand(f, basis);
    CHECK(e.residual_l2 <= prev + 1e-12);
    prev = e.residual_l2;
    if (k_max <= 3) CHECK(e.truncation_warning);  // x^4 needs the degree-4 level
    if (k_max >= 5) CHECK(!e.truncation_warning);
  }
}

TEST_CASE("split partitions levels by 2 lambda_k vs lambda_1") {
  // alpha = 0.5: f with no component below gamma=2 has empty f_(s), f_(c)
  {
    auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 0.5, 6);
    auto f = split(expansion_from_pairs(basis, {{1, 0, 1.0}, {2, 0, 1.0}}));
    CHECK(f.split->small.gamma_level == -1);
    CHECK(f.split->critical.gamma_level == -1);
    for (int p = 0; p < basis->pairs(); ++p)
      CHECK(f.split->large.coeffs[p] == f.coeffs[p]);
  }
  // alpha = 2, f = phi_2: 2 lambda_2 = lambda_1, all of f critical
  {
    auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 2.0, 6);
    auto f = split(expansion_from_pairs(basis, {{1, 0, 1.0}}));
    CHECK(f.split->critical.coeffs[1] == doctest::Approx(1.0));
    CHECK(f.split->small.gamma_level == -1);
    CHECK(f.split->large.gamma_level == -1);
  }
  // alpha = 4, f = phi_2 + phi_4: f_(s) = phi_2, f_(l) = phi_4, f_(c) = 0
  {
    auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 4.0, 6);
    auto f = split(expansion_from_pairs(basis, {{1, 0, 1.0}, {3, 0, 1.0}}));
    CHECK(f.split->small.coeffs[1] == doctest::Approx(1.0));
    CHECK(f.split->small.coeffs[3] == 0.0);
    CHECK(f.split->large.coeffs[3] == doctest::Approx(1.0));
    CHECK(f.split->critical.gamma_level == -1);
  }
}

TEST_CASE("split is an exact partition of the coefficient map") {
  auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 2.0, 7);
  std::vector<std::tuple<int, int, double>> terms;
  for (int k = 0; k < 7; ++k) terms.emplace_back(k, 0, std::cos(1.0 + k));
  auto f = split(expansion_from_pairs(basis, terms));
  for (int p = 0; p < basis->pairs(); ++p) {
    const double sum = f.split->small.coeffs[p] + f.split->critical.coeffs[p] +
                       f.split->large.coeffs[p];
    CHECK(sum == f.coeffs[p]);  // exact, not approximate
    int owners = 0;
    for (const FunctionExpansion* part :
         {&f.split->small, &f.split->critical, &f.split->large})
      if (part->coeffs[p] != 0.0) ++owners;
    CHECK(owners <= 1);
  }
}

TEST_CASE("expansion_from_pairs rejects out-of-basis indices") {
  auto basis = closed_form_spectrum(OUParams{1, 1, 1}, 0.0, 3);
  CHECK_THROWS_AS(expansion_from_pairs(basis, {{5, 0, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(expansion_from_pairs(basis, {{1, 1, 1.0}}), std::invalid_argument);
}
