#pragma once

#include "bcl/moments.hpp"
#include "bcl/verify.hpp"

namespace fixtures {

/// b=1, sigma2=1, binary branching p2=1 at rate beta: alpha = beta, A = 2 beta.
inline bcl::ModelSpec yule(double beta, int k_max = 8) {
  bcl::ModelSpecOptions opts;
  opts.k_max = k_max;
  return bcl::ModelSpec::build(bcl::OUParams{1.0, 1.0, 1},
                               bcl::constant_mechanism(beta, {0.0, 0.0, 1.0}), opts);
}

/// Small-regime preset: beta=1, p0=.2, p2=.8 => alpha=.6, A=1.6, lambda1=-.6.
inline bcl::ModelSpec small_regime(int k_max = 8) {
  bcl::ModelSpecOptions opts;
  opts.k_max = k_max;
  return bcl::ModelSpec::build(bcl::OUParams{1.0, 1.0, 1},
                               bcl::constant_mechanism(1.0, {0.2, 0.0, 0.8}), opts);
}

/// Theorem 2.3 preset: b=.5, beta=1, p4=1 => alpha=3, A=12, lambda_k=(k-1)/2-3,
/// level 4 critical (2 lambda_4 = lambda_1 = -3).
inline bcl::ModelSpec quadruple(int k_max = 8) {
  bcl::ModelSpecOptions opts;
  opts.k_max = k_max;
  return bcl::ModelSpec::build(bcl::OUParams{0.5, 1.0, 1},
                               bcl::constant_mechanism(1.0, {0, 0, 0, 0, 1.0}), opts);
}

inline bcl::FunctionExpansion eigen_f(const bcl::ModelSpec& m, int level, int j = 0,
                                      double w = 1.0) {
  return bcl::split(bcl::expansion_from_pairs(m.basis, {{level, j, w}}));
}

}  // namespace fixtures
