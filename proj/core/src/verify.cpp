#include "bcl/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bcl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct CenteringPair {
  int level = 0, j = 0;
  double a = 0;
};

std::vector<CenteringPair> centering_pairs(const FunctionExpansion& f) {
  std::vector<CenteringPair> out;
  if (!f.split) throw std::logic_error("centering_pairs: split not populated");
  const auto& basis = *f.basis;
  for (int k : f.split->small_levels)
    for (int j = 0; j < basis.mult[k]; ++j) {
      const double a = f.coeffs[basis.pair_index(k, j)];
      if (a != 0.0) out.push_back({k, j, a});
    }
  return out;
}

int snapshot_index(const Trajectory& traj, double t) {
  for (size_t i = 0; i < traj.snapshot_times.size(); ++i)
    if (std::abs(traj.snapshot_times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t)))
      return static_cast<int>(i);
  throw std::invalid_argument("statistic: trajectory has no snapshot at the statistic time");
}

double expansion_functional(const Configuration& config, const FunctionExpansion& f) {
  double acc = 0.0;
  for (size_t i = 0; i < config.count(); ++i) acc += f.eval(config.at(i));
  return acc;
}

Regime checked_regime(const ModelSpec& model, const FunctionExpansion& f, Regime want,
                      const char* op) {
  const Regime got = classify_regime(model, f);
  if (got != want) {
    std::ostringstream os;
    os << op << ": scenario regime is " << regime_name(got) << ", not "
       << regime_name(want);
    throw std::invalid_argument(os.str());
  }
  return got;
}

}  // namespace

Scenario Scenario::make(ModelSpec model, FunctionExpansion f, double t, double extension,
                        uint64_t n_replicates, uint64_t seed) {
  if (!(t > 0)) throw std::invalid_argument("Scenario: t must be > 0");
  if (f.gamma_level < 0) throw std::invalid_argument("Scenario: f is identically zero");
  Scenario sc;
  sc.model = std::move(model);
  sc.f = f.split ? std::move(f) : split(f);
  sc.t = t;
  sc.extension = extension;
  sc.n_replicates = n_replicates;
  sc.seed = seed;
  sc.x0.assign(sc.model.ou.d, 0.0);
  sc.regime = classify_regime(sc.model, sc.f);
  return sc;
}

std::optional<double> stat_small(const Trajectory& traj, const ModelSpec& model,
                                 const FunctionExpansion& f, double t) {
  const FunctionExpansion fs = f.split ? f : split(f);
  checked_regime(model, fs, Regime::small, "stat_small");
  const Configuration& cfg = traj.snapshots[snapshot_index(traj, t)];
  if (cfg.count() == 0) return std::nullopt;
  const double w = functional(cfg, [&](const double* x) {
    return model.basis->eval_pair(0, x);
  });
  if (!(w > 0)) return std::nullopt;
  return expansion_functional(cfg, fs) / std::sqrt(w);
}

std::optional<double> stat_critical(const Trajectory& traj, const ModelSpec& model,
                                    const FunctionExpansion& f, double t) {
  const FunctionExpansion fs = f.split ? f : split(f);
  checked_regime(model, fs, Regime::critical, "stat_critical");
  const Configuration& cfg = traj.snapshots[snapshot_index(traj, t)];
  if (cfg.count() == 0) return std::nullopt;
  const double w = functional(cfg, [&](const double* x) {
    return model.basis->eval_pair(0, x);
  });
  if (!(w > 0)) return std::nullopt;
  return expansion_functional(cfg, fs) / std::sqrt(t * w);
}

namespace {

std::optional<double> stat_large_impl(const Trajectory& traj, const ModelSpec& model,
                                      const FunctionExpansion& fs, double t,
                                      bool critical_scale) {
  const Configuration& at_t = traj.snapshots[snapshot_index(traj, t)];
  const Configuration& at_T = traj.snapshots.back();
  if (at_t.count() == 0) return std::nullopt;
  const double w = functional(at_t, [&](const double* x) {
    return model.basis->eval_pair(0, x);
  });
  if (!(w > 0)) return std::nullopt;

  double centered = expansion_functional(at_t, fs);
  const double delta = at_T.t - t;
  for (const auto& cp : centering_pairs(fs)) {
    const double phi_sum = functional(at_T, [&](const double* x) {
      return model.basis->eval_pair(cp.level, cp.j, x);
    });
    centered -= cp.a * std::exp(model.basis->lambda[cp.level] * delta) * phi_sum;
  }
  double stat = centered / std::sqrt(w);
  if (critical_scale) stat /= std::sqrt(t);
  return stat;
}

}  // namespace

std::optional<double> stat_large(const Trajectory& traj, const ModelSpec& model,
                                 const FunctionExpansion& f, double t) {
  const FunctionExpansion fs = f.split ? f : split(f);
  checked_regime(model, fs, Regime::large, "stat_large");
  if (fs.split->critical.gamma_level >= 0)
    throw std::invalid_argument(
        "stat_large: f_(c) != 0; use stat_large_critical (Theorem 2.3 form)");
  return stat_large_impl(traj, model, fs, t, false);
}

std::optional<double> stat_large_critical(const Trajectory& traj, const ModelSpec& model,
                                          const FunctionExpansion& f, double t) {
  const FunctionExpansion fs = f.split ? f : split(f);
  checked_regime(model, fs, Regime::large, "stat_large_critical");
  if (fs.split->critical.gamma_level < 0)
    throw std::invalid_argument("stat_large_critical: f_(c) == 0; use stat_large");
  return stat_large_impl(traj, model, fs, t, true);
}

EnsembleReport run_scenario(const Scenario& sc, const Thresholds& th, int threads) {
  if (!sc.model.supercritical)
    throw std::invalid_argument("run_scenario: model is not supercritical");
  const auto& basis = sc.model.basis;
  const bool extended = sc.needs_extension() && sc.delta() > 0;
  const double T = sc.horizon();

  std::vector<double> snaps{sc.t};
  if (extended) snaps.push_back(T);

  // rows: f, phi_1, then the centering pairs
  std::vector<std::vector<double>> rows;
  rows.push_back(FunctionalSet::row_of(sc.f));
  rows.push_back(FunctionalSet::row_of_pair(basis, 0, 0));
  std::vector<CenteringPair> pairs;
  if (sc.regime == Regime::large) {
    pairs = centering_pairs(sc.f);
    for (const auto& cp : pairs)
      rows.push_back(FunctionalSet::row_of_pair(basis, cp.level, cp.j));
  }
  const FunctionalSet funcs(basis, std::move(rows));

  SimConfig sim;
  sim.horizon = T;
  sim.snapshot_times = snaps;
  sim.pop_cap = sc.pop_cap;
  sim.event_budget = sc.event_budget;
  sim.rng_seed = sc.seed;

  Configuration init;
  init.dim = sc.model.ou.d;
  init.coords = sc.x0;

  const bool crit_f_c = sc.regime == Regime::large && sc.f.split->critical.gamma_level >= 0;
  const int last = extended ? 1 : 0;

  std::vector<SampleRow> samples(sc.n_replicates);
  for_each_replicate(sc.n_replicates, threads, [&](uint64_t rep) {
    Rng rng = Rng::stream(sc.seed, rep);
    const StreamStats st = run_functionals(sc.model, init, sim, funcs, rng);
    SampleRow row;
    row.replicate = rep;
    row.capped = st.capped;
    if (st.capped) {
      row.statistic = kNaN;
      samples[rep] = row;
      return;
    }
    const double fX_t = st.sums[0][0];
    const double phi1X_t = st.sums[0][1];
    const double phi1X_T = st.sums[last][1];
    row.w_t = std::exp(sc.model.lambda1 * sc.t) * phi1X_t;
    const double w_T = std::exp(sc.model.lambda1 * T) * phi1X_T;
    row.survived = st.counts[last] > 0 && w_T >= sc.survival_threshold;

    if (st.counts[0] == 0 || !(phi1X_t > 0)) {
      row.survived = false;
      row.statistic = kNaN;
      samples[rep] = row;
      return;
    }
    double stat;
    switch (sc.regime) {
      case Regime::small:
        stat = fX_t / std::sqrt(phi1X_t);
        break;
      case Regime::critical:
        stat = fX_t / std::sqrt(sc.t * phi1X_t);
        break;
      case Regime::large: {
        double centered = fX_t;
        for (size_t i = 0; i < pairs.size(); ++i) {
          const double phiX_T = st.sums[last][2 + i];
          centered -= pairs[i].a *
                      std::exp(basis->lambda[pairs[i].level] * (T - sc.t)) * phiX_T;
        }
        stat = centered / std::sqrt(phi1X_t);
        if (crit_f_c) stat /= std::sqrt(sc.t);
        break;
      }
      default:
        stat = kNaN;
    }
    row.statistic = stat;
    samples[rep] = row;
  });

  const double predicted = predicted_statistic_variance(sc.model, sc.f);
  EnsembleReport rep = limit_law_tests(std::move(samples), predicted, th);
  rep.regime = sc.regime;
  return rep;
}

bool EnsembleReport::all_pass() const {
  if (underpowered) return false;
  for (const auto& c : checks)
    if (c.applicable && !c.pass) return false;
  return true;
}

EnsembleReport limit_law_tests(std::vector<SampleRow> samples, double predicted_variance,
                               const Thresholds& th) {
  EnsembleReport rep;
  rep.n_replicates = samples.size();
  rep.predicted_variance = predicted_variance * th.variance_scale;

  std::vector<double> stats, ws;
  for (const auto& s : samples) {
    if (s.capped) {
      ++rep.capped;
    } else if (!s.survived || !std::isfinite(s.statistic)) {
      ++rep.extinct;
    } else {
      stats.push_back(s.statistic);
      ws.push_back(s.w_t);
    }
  }
  rep.used = stats.size();
  rep.samples = std::move(samples);

  if (rep.used < th.min_samples) {
    rep.underpowered = true;
    CheckResult c;
    c.name = "sample_size";
    c.pass = false;
    c.applicable = true;
    c.value = static_cast<double>(rep.used);
    std::ostringstream os;
    os << "only " << rep.used << " conditional samples; need >= " << th.min_samples;
    c.detail = os.str();
    rep.checks.push_back(c);
    return rep;
  }

  const double v = rep.predicted_variance;
  std::vector<double> standardized(stats.size());
  for (size_t i = 0; i < stats.size(); ++i) standardized[i] = stats[i] / std::sqrt(v);
  rep.ks = ks_test_standard_normal(standardized);
  rep.stat_moments = sample_moments(stats);

  std::vector<double> stat2(stats.size());
  for (size_t i = 0; i < stats.size(); ++i) stat2[i] = stats[i] * stats[i];
  rep.w_stat2_corr = sample_correlation(ws, stat2);

  rep.centered_mean_se_ratio =
      rep.stat_moments.mean_se > 0 ? rep.stat_moments.mean / rep.stat_moments.mean_se : 0;

  auto add = [&](const std::string& name, bool pass, double value, std::string detail) {
    rep.checks.push_back({name, pass, true, value, std::move(detail)});
  };

  {
    std::ostringstream os;
    os << "KS D=" << rep.ks.d << " p=" << rep.ks.p_value << " (min " << th.ks_p_min << ")";
    add("ks_normal", rep.ks.p_value >= th.ks_p_min, rep.ks.p_value, os.str());
  }
  {
    const double ratio = rep.stat_moments.variance / v;
    std::ostringstream os;
    os << "empirical " << rep.stat_moments.variance << " +- " << rep.stat_moments.variance_se
       << " vs predicted " << v << " (ratio " << ratio << ", tol " << th.var_rel_tol << ")";
    add("variance_ratio", std::abs(ratio - 1.0) <= th.var_rel_tol, ratio, os.str());
  }
  {
    const double z = std::abs(rep.stat_moments.skewness) /
                     std::max(rep.stat_moments.skewness_se, 1e-300);
    std::ostringstream os;
    os << "skew " << rep.stat_moments.skewness << " +- " << rep.stat_moments.skewness_se;
    add("skewness", z <= th.se_multiplier, rep.stat_moments.skewness, os.str());
  }
  {
    const double z = std::abs(rep.stat_moments.excess_kurtosis) /
                     std::max(rep.stat_moments.excess_kurtosis_se, 1e-300);
    std::ostringstream os;
    os << "exkurt " << rep.stat_moments.excess_kurtosis << " +- "
       << rep.stat_moments.excess_kurtosis_se;
    add("excess_kurtosis", z <= th.se_multiplier, rep.stat_moments.excess_kurtosis, os.str());
  }
  {
    const double z = std::abs(rep.w_stat2_corr.r) / std::max(rep.w_stat2_corr.se, 1e-300);
    std::ostringstream os;
    os << "corr(W_t, stat^2) = " << rep.w_stat2_corr.r << " +- " << rep.w_stat2_corr.se;
    add("independence_corr", z <= th.se_multiplier, rep.w_stat2_corr.r, os.str());
  }
  return rep;
}

L2Report theorem12_l2_check(const ModelSpec& model, const FunctionExpansion& f,
                            const std::vector<double>& times, double extension,
                            uint64_t n_replicates, uint64_t seed, int threads,
                            uint64_t pop_cap) {
  const FunctionExpansion fs = f.split ? f : split(f);
  checked_regime(model, fs, Regime::large, "theorem12_l2_check");
  if (times.empty()) throw std::invalid_argument("theorem12_l2_check: no times");
  const auto& basis = model.basis;
  const int gamma = fs.gamma_level;
  const double lambda_gamma = basis->lambda[gamma];
  const double T = *std::max_element(times.begin(), times.end()) + extension;

  std::vector<double> snaps = times;
  std::sort(snaps.begin(), snaps.end());
  const bool t_equals_T = std::abs(snaps.back() - T) < 1e-12;
  if (!t_equals_T) snaps.push_back(T);
  const size_t t_count = times.size();

  std::vector<std::vector<double>> rows;
  rows.push_back(FunctionalSet::row_of(fs));
  std::vector<CenteringPair> gpairs;
  for (int j = 0; j < basis->mult[gamma]; ++j) {
    const double a = fs.coeffs[basis->pair_index(gamma, j)];
    if (a != 0.0) {
      gpairs.push_back({gamma, j, a});
      rows.push_back(FunctionalSet::row_of_pair(basis, gamma, j));
    }
  }
  const FunctionalSet funcs(basis, std::move(rows));

  SimConfig sim;
  sim.horizon = snaps.back();
  sim.snapshot_times = snaps;
  sim.pop_cap = pop_cap;
  sim.rng_seed = seed;

  Configuration init;
  init.dim = model.ou.d;
  init.coords.assign(model.ou.d, 0.0);

  // per replicate, per time: squared deviation
  std::vector<std::vector<double>> sq(t_count, std::vector<double>(n_replicates, 0.0));
  std::vector<uint8_t> ok(n_replicates, 0);
  for_each_replicate(n_replicates, threads, [&](uint64_t repi) {
    Rng rng = Rng::stream(seed, repi);
    const StreamStats st = run_functionals(model, init, sim, funcs, rng);
    if (st.capped) return;
    ok[repi] = 1;
    const size_t last = st.snapshot_times.size() - 1;
    double limit = 0.0;
    for (size_t g = 0; g < gpairs.size(); ++g)
      limit += gpairs[g].a * std::exp(lambda_gamma * T) * st.sums[last][1 + g];
    for (size_t i = 0; i < t_count; ++i) {
      // snapshot i is times[i] sorted; map back
      const double ti = snaps[i];
      const double dev = std::exp(lambda_gamma * ti) * st.sums[i][0] - limit;
      sq[i][repi] = dev * dev;
    }
  });

  L2Report out;
  for (size_t i = 0; i < t_count; ++i) {
    std::vector<double> values;
    for (uint64_t r = 0; r < n_replicates; ++r)
      if (ok[r]) values.push_back(sq[i][r]);
    if (values.size() < 2) throw std::runtime_error("theorem12_l2_check: too few replicates");
    const SampleMoments m = sample_moments(values);
    const double l2 = std::sqrt(std::max(0.0, m.mean));
    out.times.push_back(snaps[i]);
    out.l2.push_back(l2);
    out.se.push_back(l2 > 0 ? m.mean_se / (2.0 * l2) : m.mean_se);
  }
  out.decreasing_up_to_se = true;
  for (size_t i = 0; i + 1 < out.l2.size(); ++i) {
    const double allowance =
        2.0 * std::sqrt(out.se[i] * out.se[i] + out.se[i + 1] * out.se[i + 1]);
    if (out.l2[i + 1] > out.l2[i] + allowance) out.decreasing_up_to_se = false;
  }
  return out;
}

}  // namespace bcl
