#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bcl/spectral.hpp"

namespace bcl {

/// Branching-rate regimes of the limit theorems, by the sign of
/// lambda_1 - 2 lambda_{gamma(f)}.
enum class Regime { large, critical, small };
const char* regime_name(Regime r);

/// Offspring pmf at a point: fills pmf[0..n_max].
using PmfFn = std::function<void(const double*, std::span<double>)>;

struct BranchingMechanism {
  std::function<double(const double*)> beta;
  PmfFn offspring;
  int n_max = 2;
  double beta_sup = 0;  // analytic sup of beta over E; thinning bound base
  bool spatially_constant = true;

  double mean_offspring(const double* x) const;
  double alpha(const double* x) const;  // beta (m1 - 1)
  double A(const double* x) const;      // beta sum_{n>=2} (n-1) n p_n
};

struct ModelSpecOptions {
  int k_max = 8;
  int basis_size = 40;  // Galerkin basis size for variable alpha
  int quad_order = 128;
  /// Permit lambda_1 >= 0 (formal variance evaluation only; simulation and
  /// verification require a supercritical model).
  bool allow_noncritical = false;
};

/// Spatial motion + branching mechanism + derived spectral data.
struct ModelSpec {
  OUParams ou;
  BranchingMechanism mech;
  BasisPtr basis;
  double lambda1 = 0;
  bool supercritical = false;
  double K_bound = 0;  // sup over nodes of |alpha| + A, cf. (1.5)

  std::vector<double> alpha_nodes, A_nodes, phi1_nodes;

  static ModelSpec build(const OUParams& ou, const BranchingMechanism& mech,
                         const ModelSpecOptions& opts = {});
};

struct MomentReport {
  double mean = 0;
  double second_moment = 0;
  double variance = 0;
  double quadrature_error_estimate = 0;
  int truncation_level = 0;
};

Regime classify_regime(double lambda1, double lambda_gamma);
Regime classify_regime(const ModelSpec& model, const FunctionExpansion& f);

/// T_t f(x) via the eigen-expansion.
double mean_Tt(const ModelSpec& model, const FunctionExpansion& f, double t, const double* x);

struct SecondMomentOptions {
  double rel_tol = 1e-9;
  int max_depth = 28;
};

/// Exact second-moment formula: int_0^t T_s[A (T_{t-s} f)^2](x) ds + T_t(f^2)(x),
/// with the time integral done by adaptive panels and (T f)^2 re-expanded in the
/// basis nodewise (projection residual carried in the error estimate).
MomentReport second_moment(const ModelSpec& model, const FunctionExpansion& f, double t,
                           const double* x, const SecondMomentOptions& opts = {});

// Limiting-variance functionals. Each hard-fails when its regime precondition
// does not hold, naming the regime that does apply. The *_fn forms take the
// variance coefficient A as node samples so the algebraic identities (e.g.
// A == 0) are testable independently of offspring-law constraints.

double sigma2_small_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                       const FunctionExpansion& f);
double sigma2_small(const ModelSpec& model, const FunctionExpansion& f);
/// Validation route: adaptive time quadrature with exponential tail cutoff.
double sigma2_small_quadrature(const ModelSpec& model, const FunctionExpansion& f);

double rho2_critical_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                        const FunctionExpansion& f);
double rho2_critical(const ModelSpec& model, const FunctionExpansion& f);

double beta2_large_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                      const FunctionExpansion& f);
double beta2_large(const ModelSpec& model, const FunctionExpansion& f);

double eta2_large_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                     const FunctionExpansion& f, const double* x);
double eta2_large(const ModelSpec& model, const FunctionExpansion& f, const double* x);
/// Validation route for eta2: adaptive time quadrature of the same integral.
double eta2_large_quadrature(const ModelSpec& model, const FunctionExpansion& f,
                             const double* x);

/// Variance displayed in the remark after the phi_1 fluctuation CLT:
/// <A phi_1^2, phi_1> / (-lambda_1).
double remark_phi1_variance_fn(const BasisPtr& basis, const std::vector<double>& A_nodes);
double remark_phi1_variance(const ModelSpec& model);

/// Predicted limit variance of the normalized statistic for (model, f) in its
/// regime: sigma_f^2 (small), rho_f^2 (critical), sigma_{f(l)}^2 + beta_f^2
/// (large, f_(c)=0), rho_{f_(c)}^2 (large, f_(c)!=0).
double predicted_statistic_variance(const ModelSpec& model, const FunctionExpansion& f_split);

// Constant-parameter mechanism helpers.
BranchingMechanism constant_mechanism(double beta, const std::vector<double>& pmf);

}  // namespace bcl
