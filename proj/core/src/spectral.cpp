#include "bcl/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bcl {

int SpectralBasis::level_of_pair(int p) const {
  for (int k = 0; k < levels(); ++k)
    if (p < offset[k + 1]) return k;
  throw std::out_of_range("SpectralBasis: pair index out of range");
}

void SpectralBasis::tensor_values(const double* x, std::span<double> out) const {
  const double s = ou.stationary_sd();
  double table[kMaxDim][64];
  if (max_degree >= 64) throw std::runtime_error("SpectralBasis: max_degree too large");
  for (int c = 0; c < ou.d; ++c)
    hermite_orthonormal(x[c] / s, max_degree, std::span<double>(table[c], max_degree + 1));
  for (size_t m = 0; m < tensor.size(); ++m) {
    double v = 1.0;
    for (int c = 0; c < ou.d; ++c) v *= table[c][tensor[m][c]];
    out[m] = v;
  }
}

double SpectralBasis::eval_pair(int p, const double* x) const {
  std::vector<double> tv(tensor.size());
  tensor_values(x, tv);
  const std::vector<double>& c = coeff[p];
  double acc = 0.0;
  for (size_t m = 0; m < tv.size(); ++m) acc += c[m] * tv[m];
  return acc;
}

void SpectralBasis::finalize(int quad_order) {
  quad_ = MuQuadrature(ou, quad_order);
  node_values_.assign(pairs(), {});
  std::vector<double> tv(tensor.size());
  std::vector<std::vector<double>> tensor_at_nodes(quad_.size());
  for (size_t q = 0; q < quad_.size(); ++q) {
    tensor_values(quad_.point(q), tv);
    tensor_at_nodes[q] = tv;
  }
  for (int p = 0; p < pairs(); ++p) {
    node_values_[p].resize(quad_.size());
    for (size_t q = 0; q < quad_.size(); ++q) {
      double acc = 0.0;
      const auto& t = tensor_at_nodes[q];
      for (size_t m = 0; m < t.size(); ++m) acc += coeff[p][m] * t[m];
      node_values_[p][q] = acc;
    }
  }
}

double FunctionExpansion::eval(const double* x) const {
  std::vector<double> tv(basis->tensor.size());
  basis->tensor_values(x, tv);
  double acc = 0.0;
  for (int p = 0; p < basis->pairs(); ++p) {
    if (coeffs[p] == 0.0) continue;
    const auto& c = basis->coeff[p];
    double v = 0.0;
    for (size_t m = 0; m < tv.size(); ++m) v += c[m] * tv[m];
    acc += coeffs[p] * v;
  }
  return acc;
}

std::vector<double> FunctionExpansion::node_values() const {
  const auto& quad = basis->quad();
  std::vector<double> out(quad.size(), 0.0);
  for (int p = 0; p < basis->pairs(); ++p) {
    if (coeffs[p] == 0.0) continue;
    const auto& nv = basis->pair_node_values(p);
    for (size_t q = 0; q < out.size(); ++q) out[q] += coeffs[p] * nv[q];
  }
  return out;
}

std::vector<double> FunctionExpansion::level_node_values(int level) const {
  const auto& quad = basis->quad();
  std::vector<double> out(quad.size(), 0.0);
  for (int j = 0; j < basis->mult[level]; ++j) {
    const int p = basis->pair_index(level, j);
    if (coeffs[p] == 0.0) continue;
    const auto& nv = basis->pair_node_values(p);
    for (size_t q = 0; q < out.size(); ++q) out[q] += coeffs[p] * nv[q];
  }
  return out;
}

bool FunctionExpansion::level_is_null(int level) const {
  for (int j = 0; j < basis->mult[level]; ++j)
    if (std::abs(coeffs[basis->pair_index(level, j)]) > zero_threshold) return false;
  return true;
}

BasisPtr closed_form_spectrum(const OUParams& params, double alpha_const, int k_max,
                              int quad_order) {
  params.validate();
  if (k_max < 1) throw std::invalid_argument("closed_form_spectrum: K_max must be >= 1");
  auto basis = std::make_shared<SpectralBasis>();
  basis->ou = params;
  basis->source = SpectralBasis::Source::closed_form;
  basis->max_degree = k_max - 1;
  basis->tensor = graded_multi_indices(params.d, basis->max_degree);

  basis->offset.push_back(0);
  size_t m = 0;
  for (int k = 0; k < k_max; ++k) {
    basis->lambda.push_back(params.b * k - alpha_const);
    const int nk = static_cast<int>(degree_count(params.d, k));
    basis->mult.push_back(nk);
    for (int j = 0; j < nk; ++j) {
      std::vector<double> c(basis->tensor.size(), 0.0);
      c[m + j] = 1.0;
      basis->coeff.push_back(std::move(c));
    }
    m += nk;
    basis->offset.push_back(static_cast<int>(basis->coeff.size()));
  }
  basis->finalize(quad_order);
  return basis;
}

BasisPtr galerkin_spectrum(const OUParams& params,
                           const std::function<double(const double*)>& alpha, int basis_size,
                           int k_max, const GalerkinOptions& opts) {
  params.validate();
  if (k_max < 1) throw std::invalid_argument("galerkin_spectrum: K_max must be >= 1");
  if (basis_size < k_max + 1)
    throw std::invalid_argument("galerkin_spectrum: basis size N must exceed K_max");

  const int max_degree = basis_size - 1;
  const auto tensor = graded_multi_indices(params.d, max_degree);
  const int m = static_cast<int>(tensor.size());
  MuQuadrature quad(params, opts.quad_order);

  // alpha samples, with the boundedness check of (1.5)
  std::vector<double> av(quad.size());
  for (size_t q = 0; q < quad.size(); ++q) {
    av[q] = alpha(quad.point(q));
    if (!std::isfinite(av[q]) || std::abs(av[q]) > opts.alpha_bound) {
      std::ostringstream os;
      os << "galerkin_spectrum: alpha unbounded at node (";
      for (int c = 0; c < params.d; ++c) os << (c ? "," : "") << quad.point(q)[c];
      os << "): " << av[q];
      throw std::invalid_argument(os.str());
    }
  }

  // basis values at nodes
  Eigen::MatrixXd B(m, static_cast<Eigen::Index>(quad.size()));
  {
    SpectralBasis tmp;  // reuse tensor_values
    tmp.ou = params;
    tmp.max_degree = max_degree;
    tmp.tensor = tensor;
    std::vector<double> tv(tensor.size());
    for (size_t q = 0; q < quad.size(); ++q) {
      tmp.tensor_values(quad.point(q), tv);
      for (int i = 0; i < m; ++i) B(i, static_cast<Eigen::Index>(q)) = tv[i];
    }
  }

  // L = -b * degree + Gram(alpha)
  Eigen::VectorXd wa(static_cast<Eigen::Index>(quad.size()));
  for (size_t q = 0; q < quad.size(); ++q)
    wa[static_cast<Eigen::Index>(q)] = quad.weight(q) * av[q];
  Eigen::MatrixXd L = B * wa.asDiagonal() * B.transpose();
  L = 0.5 * (L + L.transpose()).eval();
  for (int i = 0; i < m; ++i)
    L(i, i) -= params.b * total_degree(tensor[i], params.d);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("galerkin_spectrum: eigensolver failed");

  // lambda = -(eigenvalues of L), ascending
  std::vector<double> lam(m);
  for (int i = 0; i < m; ++i) lam[i] = -es.eigenvalues()[m - 1 - i];

  // cluster near-equal eigenvalues into distinct levels
  std::vector<int> cluster_begin{0};
  for (int i = 1; i < m; ++i)
    if (lam[i] - lam[i - 1] > kClusterRelTol * std::max(1.0, std::abs(lam[i])))
      cluster_begin.push_back(i);
  cluster_begin.push_back(m);

  const int n_clusters = static_cast<int>(cluster_begin.size()) - 1;
  if (n_clusters < k_max) {
    std::ostringstream os;
    os << "galerkin_spectrum: only " << n_clusters << " distinct levels in a basis of "
       << m << "; requested K_max=" << k_max;
    throw std::runtime_error(os.str());
  }
  // the K_max-th cluster must be separated from the next by a real gap
  {
    const int end = cluster_begin[k_max];
    if (end < m) {
      const double gap = lam[end] - lam[end - 1];
      if (gap <= 10 * kClusterRelTol * std::max(1.0, std::abs(lam[end]))) {
        std::ostringstream os;
        os << "galerkin_spectrum: spectral gap " << gap << " at the K_max boundary is "
           << "below cluster tolerance; clustering not convergent";
        throw std::runtime_error(os.str());
      }
    }
  }

  auto basis = std::make_shared<SpectralBasis>();
  basis->ou = params;
  basis->source = SpectralBasis::Source::galerkin;
  basis->max_degree = max_degree;
  basis->tensor = tensor;
  basis->offset.push_back(0);

  double max_resid = 0.0;
  for (int k = 0; k < k_max; ++k) {
    const int begin = cluster_begin[k], end = cluster_begin[k + 1];
    double lev = 0.0;
    for (int i = begin; i < end; ++i) lev += lam[i];
    lev /= (end - begin);
    basis->lambda.push_back(lev);
    basis->mult.push_back(end - begin);
    for (int i = begin; i < end; ++i) {
      Eigen::VectorXd v = es.eigenvectors().col(m - 1 - i);
      const double resid = (L * v + lam[i] * v).norm();
      max_resid = std::max(max_resid, resid);
      basis->coeff.emplace_back(v.data(), v.data() + m);
    }
    basis->offset.push_back(static_cast<int>(basis->coeff.size()));
  }

  // sign convention: <phi_1, 1> > 0 (coefficient on the constant Hermite fn)
  if (basis->coeff[0][0] < 0)
    for (double& c : basis->coeff[0]) c = -c;
  if (basis->mult[0] != 1)
    throw std::runtime_error("galerkin_spectrum: ground level is degenerate");

  basis->galerkin_max_residual = max_resid;
  basis->finalize(opts.quad_order);
  return basis;
}

double inner_product(const std::function<double(const double*)>& f,
                     const std::function<double(const double*)>& g, const OUParams& params,
                     int quad_order) {
  MuQuadrature quad(params, quad_order);
  double acc = 0.0;
  for (size_t q = 0; q < quad.size(); ++q) {
    const double fv = f(quad.point(q)), gv = g(quad.point(q));
    if (!std::isfinite(fv) || !std::isfinite(gv)) {
      std::ostringstream os;
      os << "inner_product: non-finite sample at node (";
      for (int c = 0; c < params.d; ++c) os << (c ? "," : "") << quad.point(q)[c];
      os << ")";
      throw std::invalid_argument(os.str());
    }
    acc += quad.weight(q) * fv * gv;
  }
  return acc;
}

FunctionExpansion expand_node_values(const std::vector<double>& values, const BasisPtr& basis,
                                     const ExpandOptions& opts) {
  const auto& quad = basis->quad();
  if (values.size() != quad.size())
    throw std::invalid_argument("expand_node_values: sample size mismatch");
  for (size_t q = 0; q < values.size(); ++q)
    if (!std::isfinite(values[q])) {
      std::ostringstream os;
      os << "expand: non-finite sample at node (";
      for (int c = 0; c < basis->ou.d; ++c) os << (c ? "," : "") << quad.point(q)[c];
      os << ")";
      throw std::invalid_argument(os.str());
    }

  FunctionExpansion e;
  e.basis = basis;
  e.coeffs.resize(basis->pairs());
  for (int p = 0; p < basis->pairs(); ++p)
    e.coeffs[p] = quad.dot(values, basis->pair_node_values(p));

  e.norm_l2 = std::sqrt(std::max(0.0, quad.dot(values, values)));
  // residual by quadrature of (f - reconstruction)^2
  std::vector<double> recon = e.node_values();
  double r2 = 0.0;
  for (size_t q = 0; q < values.size(); ++q) {
    const double d = values[q] - recon[q];
    r2 += quad.weight(q) * d * d;
  }
  e.residual_l2 = std::sqrt(std::max(0.0, r2));
  e.truncation_warning = e.residual_l2 > opts.warn_residual_frac * std::max(e.norm_l2, 1e-300);
  e.zero_threshold = opts.zero_threshold >= 0 ? opts.zero_threshold : 1e-9 * e.norm_l2;

  e.gamma_level = -1;
  for (int k = 0; k < basis->levels(); ++k)
    if (!e.level_is_null(k)) {
      e.gamma_level = k;
      break;
    }
  return e;
}

FunctionExpansion expand(const std::function<double(const double*)>& f, const BasisPtr& basis,
                         const ExpandOptions& opts) {
  return expand_node_values(basis->quad().sample(f), basis, opts);
}

FunctionExpansion expansion_from_pairs(
    const BasisPtr& basis, const std::vector<std::tuple<int, int, double>>& terms) {
  FunctionExpansion e;
  e.basis = basis;
  e.coeffs.assign(basis->pairs(), 0.0);
  for (const auto& [level, j, w] : terms) {
    if (level < 0 || level >= basis->levels() || j < 0 || j >= basis->mult[level])
      throw std::invalid_argument("expansion_from_pairs: (k, j) outside basis");
    e.coeffs[basis->pair_index(level, j)] += w;
  }
  double n2 = 0.0;
  for (double c : e.coeffs) n2 += c * c;
  e.norm_l2 = std::sqrt(n2);
  e.residual_l2 = 0.0;
  e.zero_threshold = 1e-9 * e.norm_l2;
  e.gamma_level = -1;
  for (int k = 0; k < basis->levels(); ++k)
    if (!e.level_is_null(k)) {
      e.gamma_level = k;
      break;
    }
  return e;
}

FunctionExpansion split(const FunctionExpansion& e) {
  const auto& basis = *e.basis;
  const double lambda1 = basis.lambda[0];
  auto sp = std::make_shared<ExpansionSplit>();

  auto blank = [&] {
    FunctionExpansion z;
    z.basis = e.basis;
    z.coeffs.assign(basis.pairs(), 0.0);
    z.zero_threshold = e.zero_threshold;
    z.gamma_level = -1;
    return z;
  };
  sp->small = blank();
  sp->critical = blank();
  sp->large = blank();
  sp->level_gamma = blank();

  const double tol = kRegimeEqRelTol * std::max(1.0, std::abs(lambda1));
  for (int k = 0; k < basis.levels(); ++k) {
    const double gap = 2.0 * basis.lambda[k] - lambda1;
    FunctionExpansion* dst;
    if (std::abs(gap) <= tol) {
      dst = &sp->critical;
      sp->critical_levels.push_back(k);
    } else if (gap < 0) {
      dst = &sp->small;
      sp->small_levels.push_back(k);
    } else {
      dst = &sp->large;
      sp->large_levels.push_back(k);
    }
    for (int j = 0; j < basis.mult[k]; ++j) {
      const int p = basis.pair_index(k, j);
      dst->coeffs[p] = e.coeffs[p];
    }
  }
  if (e.gamma_level >= 0)
    for (int j = 0; j < basis.mult[e.gamma_level]; ++j) {
      const int p = basis.pair_index(e.gamma_level, j);
      sp->level_gamma.coeffs[p] = e.coeffs[p];
    }

  for (FunctionExpansion* part :
       {&sp->small, &sp->critical, &sp->large, &sp->level_gamma}) {
    double n2 = 0.0;
    for (double c : part->coeffs) n2 += c * c;
    part->norm_l2 = std::sqrt(n2);
    for (int k = 0; k < basis.levels(); ++k)
      if (!part->level_is_null(k)) {
        part->gamma_level = k;
        break;
      }
  }

  FunctionExpansion out = e;
  out.split = sp;
  return out;
}

}  // namespace bcl
