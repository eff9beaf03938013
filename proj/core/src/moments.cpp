#include "bcl/moments.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bcl {

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::large: return "large";
    case Regime::critical: return "critical";
    case Regime::small: return "small";
  }
  return "?";
}

double BranchingMechanism::mean_offspring(const double* x) const {
  std::vector<double> pmf(n_max + 1);
  offspring(x, pmf);
  double m1 = 0;
  for (int n = 0; n <= n_max; ++n) m1 += n * pmf[n];
  return m1;
}

double BranchingMechanism::alpha(const double* x) const {
  return beta(x) * (mean_offspring(x) - 1.0);
}

double BranchingMechanism::A(const double* x) const {
  std::vector<double> pmf(n_max + 1);
  offspring(x, pmf);
  double acc = 0;
  for (int n = 2; n <= n_max; ++n) acc += (n - 1.0) * n * pmf[n];
  return beta(x) * acc;
}

BranchingMechanism constant_mechanism(double beta, const std::vector<double>& pmf) {
  if (pmf.empty()) throw std::invalid_argument("constant_mechanism: empty pmf");
  BranchingMechanism mech;
  mech.n_max = static_cast<int>(pmf.size()) - 1;
  mech.beta = [beta](const double*) { return beta; };
  std::vector<double> table = pmf;
  mech.offspring = [table](const double*, std::span<double> out) {
    for (size_t n = 0; n < table.size(); ++n) out[n] = table[n];
  };
  mech.beta_sup = beta;
  mech.spatially_constant = true;
  return mech;
}

ModelSpec ModelSpec::build(const OUParams& ou, const BranchingMechanism& mech,
                           const ModelSpecOptions& opts) {
  ou.validate();
  if (mech.n_max < 0 || mech.n_max > 16)
    throw std::invalid_argument("ModelSpec: offspring n_max must be in [0, 16]");
  if (!(mech.beta_sup >= 0))
    throw std::invalid_argument("ModelSpec: beta_sup must be >= 0");

  ModelSpec m;
  m.ou = ou;
  m.mech = mech;

  // validate the pmf and the beta bound on a probe grid
  {
    MuQuadrature probe(ou, 33);
    std::vector<double> pmf(mech.n_max + 1);
    for (size_t q = 0; q < probe.size(); ++q) {
      const double* x = probe.point(q);
      mech.offspring(x, pmf);
      double sum = 0;
      for (double p : pmf) {
        if (!(p >= 0)) throw std::invalid_argument("ModelSpec: negative pmf entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("ModelSpec: offspring pmf does not sum to 1");
      const double b = mech.beta(x);
      if (!(b >= 0)) throw std::invalid_argument("ModelSpec: beta must be >= 0");
      if (b > mech.beta_sup * (1 + 1e-12))
        throw std::invalid_argument("ModelSpec: beta exceeds declared sup");
    }
  }

  if (mech.spatially_constant) {
    const double origin[kMaxDim] = {0, 0, 0, 0};
    m.basis = closed_form_spectrum(ou, mech.alpha(origin), opts.k_max, opts.quad_order);
  } else {
    auto alpha_fn = [&mech](const double* x) { return mech.alpha(x); };
    m.basis = galerkin_spectrum(ou, alpha_fn, opts.basis_size, opts.k_max,
                                GalerkinOptions{opts.quad_order, 1e6});
  }

  m.lambda1 = m.basis->lambda[0];
  m.supercritical = m.lambda1 < 0;
  if (!m.supercritical && !opts.allow_noncritical) {
    std::ostringstream os;
    os << "ModelSpec: model is not supercritical (lambda_1 = " << m.lambda1 << " >= 0)";
    throw std::invalid_argument(os.str());
  }

  const auto& quad = m.basis->quad();
  m.alpha_nodes.resize(quad.size());
  m.A_nodes.resize(quad.size());
  for (size_t q = 0; q < quad.size(); ++q) {
    const double* x = quad.point(q);
    m.alpha_nodes[q] = m.mech.alpha(x);
    m.A_nodes[q] = m.mech.A(x);
    m.K_bound = std::max(m.K_bound, std::abs(m.alpha_nodes[q]) + m.A_nodes[q]);
  }
  m.phi1_nodes = m.basis->pair_node_values(0);
  return m;
}

Regime classify_regime(double lambda1, double lambda_gamma) {
  const double gap = lambda1 - 2.0 * lambda_gamma;
  const double tol = kRegimeEqRelTol * std::max(1.0, std::abs(lambda1));
  if (std::abs(gap) <= tol) return Regime::critical;
  return gap > 0 ? Regime::large : Regime::small;
}

Regime classify_regime(const ModelSpec& model, const FunctionExpansion& f) {
  if (f.gamma_level < 0)
    throw std::invalid_argument("classify_regime: f has no nonzero coefficients");
  return classify_regime(model.lambda1, model.basis->lambda[f.gamma_level]);
}

double mean_Tt(const ModelSpec& model, const FunctionExpansion& f, double t,
               const double* x) {
  if (t < 0) throw std::invalid_argument("mean_Tt: t must be >= 0");
  const auto& basis = *model.basis;
  std::vector<double> tv(basis.tensor.size());
  basis.tensor_values(x, tv);
  double acc = 0.0;
  for (int p = 0; p < basis.pairs(); ++p) {
    if (f.coeffs[p] == 0.0) continue;
    const auto& c = basis.coeff[p];
    double phi = 0.0;
    for (size_t mm = 0; mm < tv.size(); ++mm) phi += c[mm] * tv[mm];
    acc += std::exp(-basis.lambda[basis.level_of_pair(p)] * t) * f.coeffs[p] * phi;
  }
  return acc;
}

namespace {

void require_regime(Regime want, const ModelSpec* model, const BasisPtr& basis,
                    const FunctionExpansion& f, const char* op) {
  if (f.gamma_level < 0)
    throw std::invalid_argument(std::string(op) + ": f has no nonzero coefficients");
  const double lambda1 = basis->lambda[0];
  const Regime got = classify_regime(lambda1, basis->lambda[f.gamma_level]);
  if (got != want) {
    std::ostringstream os;
    os << op << ": requires the " << regime_name(want) << " regime but (model, f) is in the "
       << regime_name(got) << " regime";
    throw std::invalid_argument(os.str());
  }
  (void)model;
}

/// <A u v phi_1> over quadrature nodes.
double a_weighted_triple(const MuQuadrature& quad, const std::vector<double>& A_nodes,
                         const std::vector<double>& u, const std::vector<double>& v,
                         const std::vector<double>& phi1) {
  double acc = 0.0;
  for (size_t q = 0; q < quad.size(); ++q)
    acc += quad.weight(q) * A_nodes[q] * u[q] * v[q] * phi1[q];
  return acc;
}

std::vector<int> active_levels(const FunctionExpansion& f) {
  std::vector<int> lv;
  for (int k = 0; k < f.basis->levels(); ++k)
    if (!f.level_is_null(k)) lv.push_back(k);
  return lv;
}

}  // namespace

double sigma2_small_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                       const FunctionExpansion& f) {
  require_regime(Regime::small, nullptr, basis, f, "sigma2_small");
  const auto& quad = basis->quad();
  const auto& phi1 = basis->pair_node_values(0);
  const double lambda1 = basis->lambda[0];

  const auto levels = active_levels(f);
  std::vector<std::vector<double>> F;
  F.reserve(levels.size());
  for (int k : levels) F.push_back(f.level_node_values(k));

  double acc = 0.0;
  for (size_t a = 0; a < levels.size(); ++a)
    for (size_t b = 0; b < levels.size(); ++b) {
      const double denom = basis->lambda[levels[a]] + basis->lambda[levels[b]] - lambda1;
      acc += a_weighted_triple(quad, A_nodes, F[a], F[b], phi1) / denom;
    }

  const auto fv = f.node_values();
  double f2phi1 = 0.0;
  for (size_t q = 0; q < quad.size(); ++q)
    f2phi1 += quad.weight(q) * fv[q] * fv[q] * phi1[q];
  return acc + f2phi1;
}

double sigma2_small(const ModelSpec& model, const FunctionExpansion& f) {
  return sigma2_small_fn(model.basis, model.A_nodes, f);
}

double sigma2_small_quadrature(const ModelSpec& model, const FunctionExpansion& f) {
  const auto& basis = *model.basis;
  require_regime(Regime::small, &model, model.basis, f, "sigma2_small");
  const auto& quad = basis.quad();
  const double lambda1 = basis.lambda[0];
  const double lambda_gamma = basis.lambda[f.gamma_level];

  const auto levels = active_levels(f);
  std::vector<std::vector<double>> F;
  for (int k : levels) F.push_back(f.level_node_values(k));

  auto integrand = [&](double s) {
    double acc = 0.0;
    for (size_t q = 0; q < quad.size(); ++q) {
      double u = 0.0;
      for (size_t a = 0; a < levels.size(); ++a)
        u += std::exp(-basis.lambda[levels[a]] * s) * F[a][q];
      acc += quad.weight(q) * model.A_nodes[q] * u * u * model.phi1_nodes[q];
    }
    return std::exp(lambda1 * s) * acc;
  };

  // integrand decays like e^{(lambda1 - 2 lambda_gamma) s}; cut the tail where
  // the exponential bound has dropped by e^{-32} and add the analytic remainder
  const double rate = 2.0 * lambda_gamma - lambda1;
  const double s_star = 32.0 / rate;
  const double tail_bound = std::abs(integrand(s_star)) / rate;

  const auto fv = f.node_values();
  double f2phi1 = 0.0;
  for (size_t q = 0; q < quad.size(); ++q)
    f2phi1 += quad.weight(q) * fv[q] * fv[q] * model.phi1_nodes[q];

  return adaptive_simpson(integrand, 0.0, s_star, 1e-11, 30) + tail_bound + f2phi1;
}

double rho2_critical_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                        const FunctionExpansion& f) {
  require_regime(Regime::critical, nullptr, basis, f, "rho2_critical");
  const auto f1 = f.level_node_values(f.gamma_level);
  return a_weighted_triple(basis->quad(), A_nodes, f1, f1, basis->pair_node_values(0));
}

double rho2_critical(const ModelSpec& model, const FunctionExpansion& f) {
  return rho2_critical_fn(model.basis, model.A_nodes, f);
}

double beta2_large_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                      const FunctionExpansion& f) {
  require_regime(Regime::large, nullptr, basis, f, "beta2_large");
  const FunctionExpansion fs = f.split ? f.split->small : split(f).split->small;
  if (fs.gamma_level < 0)
    throw std::invalid_argument("beta2_large: f_(s) is empty");
  const auto& quad = basis->quad();
  const auto& phi1 = basis->pair_node_values(0);
  const double lambda1 = basis->lambda[0];

  const auto levels = active_levels(fs);
  std::vector<std::vector<double>> F;
  for (int k : levels) F.push_back(fs.level_node_values(k));

  double acc = 0.0;
  for (size_t a = 0; a < levels.size(); ++a)
    for (size_t b = 0; b < levels.size(); ++b) {
      const double denom = lambda1 - basis->lambda[levels[a]] - basis->lambda[levels[b]];
      if (!(denom > 0))
        throw std::logic_error("beta2_large: nonpositive pair exponent; split is broken");
      acc += a_weighted_triple(quad, A_nodes, F[a], F[b], phi1) / denom;
    }

  const auto fsv = fs.node_values();
  double fs2phi1 = 0.0;
  for (size_t q = 0; q < quad.size(); ++q)
    fs2phi1 += quad.weight(q) * fsv[q] * fsv[q] * phi1[q];
  return acc - fs2phi1;
}

double beta2_large(const ModelSpec& model, const FunctionExpansion& f) {
  return beta2_large_fn(model.basis, model.A_nodes, f);
}

double eta2_large_fn(const BasisPtr& basis, const std::vector<double>& A_nodes,
                     const FunctionExpansion& f, const double* x) {
  require_regime(Regime::large, nullptr, basis, f, "eta2_large");
  const double lambda_gamma = basis->lambda[f.gamma_level];
  const auto& quad = basis->quad();
  const auto f1 = f.level_node_values(f.gamma_level);
  std::vector<double> g(quad.size());
  for (size_t q = 0; q < quad.size(); ++q) g[q] = A_nodes[q] * f1[q] * f1[q];
  const FunctionExpansion ge = expand_node_values(g, basis);

  std::vector<double> tv(basis->tensor.size());
  basis->tensor_values(x, tv);
  double acc = 0.0;
  for (int p = 0; p < basis->pairs(); ++p) {
    if (ge.coeffs[p] == 0.0) continue;
    const double denom = basis->lambda[basis->level_of_pair(p)] - 2.0 * lambda_gamma;
    if (!(denom > 0)) throw std::logic_error("eta2_large: nonpositive exponent");
    const auto& c = basis->coeff[p];
    double phi = 0.0;
    for (size_t mm = 0; mm < tv.size(); ++mm) phi += c[mm] * tv[mm];
    acc += ge.coeffs[p] * phi / denom;
  }
  return acc;
}

double eta2_large(const ModelSpec& model, const FunctionExpansion& f, const double* x) {
  return eta2_large_fn(model.basis, model.A_nodes, f, x);
}

double eta2_large_quadrature(const ModelSpec& model, const FunctionExpansion& f,
                             const double* x) {
  const auto& basis = *model.basis;
  require_regime(Regime::large, &model, model.basis, f, "eta2_large");
  const double lambda_gamma = basis.lambda[f.gamma_level];
  const auto& quad = basis.quad();
  const auto f1 = f.level_node_values(f.gamma_level);
  std::vector<double> g(quad.size());
  for (size_t q = 0; q < quad.size(); ++q) g[q] = model.A_nodes[q] * f1[q] * f1[q];
  const FunctionExpansion ge = expand_node_values(g, model.basis);

  std::vector<double> tv(basis.tensor.size());
  basis.tensor_values(x, tv);
  std::vector<double> phi_at_x(basis.pairs());
  for (int p = 0; p < basis.pairs(); ++p) {
    double phi = 0.0;
    for (size_t mm = 0; mm < tv.size(); ++mm) phi += basis.coeff[p][mm] * tv[mm];
    phi_at_x[p] = phi;
  }

  auto integrand = [&](double s) {
    double acc = 0.0;
    for (int p = 0; p < basis.pairs(); ++p) {
      if (ge.coeffs[p] == 0.0) continue;
      acc += ge.coeffs[p] * phi_at_x[p] *
             std::exp(-basis.lambda[basis.level_of_pair(p)] * s);
    }
    return std::exp(2.0 * lambda_gamma * s) * acc;
  };
  const double rate = basis.lambda[0] - 2.0 * lambda_gamma;
  const double s_star = 32.0 / rate;
  const double tail = std::abs(integrand(s_star)) / rate;
  return adaptive_simpson(integrand, 0.0, s_star, 1e-11, 30) + tail;
}

double remark_phi1_variance_fn(const BasisPtr& basis, const std::vector<double>& A_nodes) {
  const double lambda1 = basis->lambda[0];
  if (!(lambda1 < 0))
    throw std::invalid_argument("remark_phi1_variance: model is not supercritical");
  const auto& phi1 = basis->pair_node_values(0);
  return a_weighted_triple(basis->quad(), A_nodes, phi1, phi1, phi1) / (-lambda1);
}

double remark_phi1_variance(const ModelSpec& model) {
  return remark_phi1_variance_fn(model.basis, model.A_nodes);
}

MomentReport second_moment(const ModelSpec& model, const FunctionExpansion& f, double t,
                           const double* x, const SecondMomentOptions& opts) {
  if (!(t > 0)) throw std::invalid_argument("second_moment: t must be > 0");
  const auto& basis = *model.basis;
  const auto& quad = basis.quad();

  const auto levels = active_levels(f);
  std::vector<std::vector<double>> F;
  for (int k : levels) F.push_back(f.level_node_values(k));

  std::vector<double> tv(basis.tensor.size());
  basis.tensor_values(x, tv);
  std::vector<double> phi_at_x(basis.pairs());
  for (int p = 0; p < basis.pairs(); ++p) {
    double phi = 0.0;
    for (size_t mm = 0; mm < tv.size(); ++mm) phi += basis.coeff[p][mm] * tv[mm];
    phi_at_x[p] = phi;
  }

  double max_weighted_residual = 0.0;
  std::vector<double> g(quad.size()), c(basis.pairs());
  auto integrand = [&](double s) {
    const double tau = t - s;
    double g_norm2 = 0.0;
    for (size_t q = 0; q < quad.size(); ++q) {
      double u = 0.0;
      for (size_t a = 0; a < levels.size(); ++a)
        u += std::exp(-basis.lambda[levels[a]] * tau) * F[a][q];
      g[q] = model.A_nodes[q] * u * u;
      g_norm2 += quad.weight(q) * g[q] * g[q];
    }
    double proj2 = 0.0, val = 0.0;
    for (int p = 0; p < basis.pairs(); ++p) {
      c[p] = quad.dot(g, basis.pair_node_values(p));
      proj2 += c[p] * c[p];
      val += std::exp(-basis.lambda[basis.level_of_pair(p)] * s) * c[p] * phi_at_x[p];
    }
    const double resid = std::sqrt(std::max(0.0, g_norm2 - proj2));
    max_weighted_residual =
        std::max(max_weighted_residual, resid * std::exp(-basis.lambda[0] * s));
    return val;
  };

  double simpson_err = 0.0;
  const double time_integral =
      adaptive_simpson(integrand, 0.0, t, opts.rel_tol, opts.max_depth, &simpson_err);

  // T_t(f^2) via nodewise squaring + projection
  const auto fv = f.node_values();
  std::vector<double> f2(quad.size());
  double f2_norm2 = 0.0;
  for (size_t q = 0; q < quad.size(); ++q) {
    f2[q] = fv[q] * fv[q];
    f2_norm2 += quad.weight(q) * f2[q] * f2[q];
  }
  double ttf2 = 0.0, f2_proj2 = 0.0;
  for (int p = 0; p < basis.pairs(); ++p) {
    const double cp = quad.dot(f2, basis.pair_node_values(p));
    f2_proj2 += cp * cp;
    ttf2 += std::exp(-basis.lambda[basis.level_of_pair(p)] * t) * cp * phi_at_x[p];
  }
  const double f2_resid = std::sqrt(std::max(0.0, f2_norm2 - f2_proj2));

  MomentReport rep;
  rep.mean = mean_Tt(model, f, t, x);
  rep.second_moment = time_integral + ttf2;
  rep.variance = rep.second_moment - rep.mean * rep.mean;
  rep.quadrature_error_estimate = simpson_err + max_weighted_residual * t +
                                  f2_resid * std::exp(-basis.lambda[0] * t);
  rep.truncation_level = basis.levels();
  return rep;
}

double predicted_statistic_variance(const ModelSpec& model, const FunctionExpansion& f) {
  const FunctionExpansion fs = f.split ? f : split(f);
  const Regime regime = classify_regime(model, fs);
  switch (regime) {
    case Regime::small:
      return sigma2_small(model, fs);
    case Regime::critical:
      return rho2_critical(model, fs);
    case Regime::large: {
      if (fs.split->critical.gamma_level >= 0)
        return rho2_critical(model, fs.split->critical);
      const double b2 = beta2_large(model, fs);
      const auto& fl = fs.split->large;
      const double s2 = fl.gamma_level >= 0 ? sigma2_small(model, fl) : 0.0;
      return s2 + b2;
    }
  }
  throw std::logic_error("predicted_statistic_variance: unreachable");
}

}  // namespace bcl
