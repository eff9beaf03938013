#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcl/hermite.hpp"
#include "bcl/ou.hpp"
#include "bcl/quadrature.hpp"

namespace bcl {

/// Two Galerkin eigenvalues belong to the same distinct level when their gap
/// is below this relative tolerance (exact degeneracies split at round-off).
inline constexpr double kClusterRelTol = 1e-6;
/// Equality test for the critical regime 2*lambda_k == lambda_1.
inline constexpr double kRegimeEqRelTol = 1e-9;

/// Spectrum of L = OU generator + alpha(x) in L^2(mu): distinct eigenvalues
/// lambda_1 < lambda_2 < ... (of -L), multiplicities, and mu-orthonormal
/// eigenfunctions stored as coefficient vectors over the tensor Hermite basis.
class SpectralBasis {
 public:
  enum class Source { closed_form, galerkin };

  OUParams ou;
  Source source = Source::closed_form;
  int max_degree = 0;                   // tensor Hermite degrees 0..max_degree
  std::vector<MultiIndex> tensor;       // enumeration of the Hermite basis
  std::vector<double> lambda;           // distinct eigenvalues, ascending
  std::vector<int> mult;                // n_k
  std::vector<int> offset;              // pair index of (k, 0); size levels()+1
  std::vector<std::vector<double>> coeff;  // per pair, length tensor.size()
  double galerkin_max_residual = 0.0;

  int levels() const { return static_cast<int>(lambda.size()); }
  int pairs() const { return offset.empty() ? 0 : offset.back(); }
  int pair_index(int level, int j) const { return offset[level] + j; }
  int level_of_pair(int p) const;

  const MuQuadrature& quad() const { return quad_; }
  /// Values of eigenfunction pair p at all quadrature nodes.
  const std::vector<double>& pair_node_values(int p) const { return node_values_[p]; }

  /// Tensor Hermite values at x (all enumerated indices).
  void tensor_values(const double* x, std::span<double> out) const;
  double eval_pair(int p, const double* x) const;
  double eval_pair(int level, int j, const double* x) const {
    return eval_pair(pair_index(level, j), x);
  }

  void finalize(int quad_order);  // builds quadrature + node value cache

 private:
  MuQuadrature quad_;
  std::vector<std::vector<double>> node_values_;
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

struct ExpansionSplit;

/// Coefficients of a test function in the eigenbasis, a_j^k = <f, phi_j^(k)>,
/// with the regime bookkeeping the theorems need.
struct FunctionExpansion {
  BasisPtr basis;
  std::vector<double> coeffs;       // aligned with basis pair indices
  int gamma_level = -1;             // 0-based index of first non-null level
  double norm_l2 = 0;
  double residual_l2 = 0;
  bool truncation_warning = false;
  double zero_threshold = 0;

  std::shared_ptr<const ExpansionSplit> split;

  double eval(const double* x) const;
  /// Values at all basis quadrature nodes.
  std::vector<double> node_values() const;
  /// Values of the level-k slice at all nodes.
  std::vector<double> level_node_values(int level) const;
  double coeff_at(int level, int j) const { return coeffs[basis->pair_index(level, j)]; }
  bool level_is_null(int level) const;
};

struct ExpansionSplit {
  FunctionExpansion small;        // f_(s): levels with 2 lambda_k <  lambda_1
  FunctionExpansion critical;     // f_(c): levels with 2 lambda_k == lambda_1
  FunctionExpansion large;        // f_(l): the rest
  FunctionExpansion level_gamma;  // f_1: the gamma(f) slice
  std::vector<int> small_levels, critical_levels, large_levels;
};

/// Analytic OU spectrum shifted by a constant potential: lambda_k = b(k-1) - alpha,
/// n_k = C(k-2+d, d-1), eigenfunctions = mu-orthonormal Hermite tensor products.
BasisPtr closed_form_spectrum(const OUParams& params, double alpha_const, int k_max,
                              int quad_order = 128);

struct GalerkinOptions {
  int quad_order = 128;
  double alpha_bound = 1e6;  // reject samples with |alpha| above this
};

/// Rayleigh-Ritz spectrum of OU generator + alpha(x) in the orthonormal Hermite
/// basis of size N (degrees 0..N-1 per total degree), clustered into distinct
/// levels. Throws when the spectral gap at the K_max boundary is below the
/// cluster tolerance, or when alpha is unbounded on the quadrature support.
BasisPtr galerkin_spectrum(const OUParams& params,
                           const std::function<double(const double*)>& alpha, int basis_size,
                           int k_max, const GalerkinOptions& opts = {});

/// Gauss-Hermite quadrature of ∫ f g dmu. Rejects non-finite sample values,
/// naming the offending node.
double inner_product(const std::function<double(const double*)>& f,
                     const std::function<double(const double*)>& g, const OUParams& params,
                     int quad_order = 128);

struct ExpandOptions {
  double zero_threshold = -1;     // < 0: default 1e-9 * ||f||_2
  double warn_residual_frac = 0.1;  // truncation warning threshold
};

FunctionExpansion expand(const std::function<double(const double*)>& f, const BasisPtr& basis,
                         const ExpandOptions& opts = {});

/// Expansion of a vector of node samples (projection onto the basis).
FunctionExpansion expand_node_values(const std::vector<double>& values, const BasisPtr& basis,
                                     const ExpandOptions& opts = {});

/// Exact expansion from explicit (level, j, weight) triples; no quadrature noise.
FunctionExpansion expansion_from_pairs(
    const BasisPtr& basis, const std::vector<std::tuple<int, int, double>>& terms);

/// Partition the coefficient levels of `e` by the sign of 2 lambda_k - lambda_1
/// and attach the four projections; returns a copy with `split` populated.
FunctionExpansion split(const FunctionExpansion& e);

}  // namespace bcl
