#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bcl/particle.hpp"
#include "bcl/stats.hpp"

namespace bcl {

struct Thresholds {
  double ks_p_min = 0.01;
  double var_rel_tol = 0.10;
  double se_multiplier = 4.0;  // skew / kurtosis / correlation / mean gates
  uint64_t min_samples = 200;
  double variance_scale = 1.0;  // negative-control override of the prediction
};

/// One verification experiment: model, test function, evaluation time, and the
/// H_infinity proxy horizon for the large-regime theorems.
struct Scenario {
  ModelSpec model;
  FunctionExpansion f;  // split populated
  double t = 1.0;
  double extension = -1.0;  // Delta; < 0 = default (== t); unused off the large regime
  uint64_t n_replicates = 1000;
  uint64_t pop_cap = 2'000'000;
  uint64_t event_budget = 0;
  uint64_t seed = 1;
  std::vector<double> x0;  // single initial particle (defaults to the origin)
  double survival_threshold = 0.0;
  Regime regime = Regime::small;

  bool needs_extension() const { return regime == Regime::large; }
  double horizon() const { return needs_extension() ? t + delta() : t; }
  double delta() const { return extension >= 0 ? extension : t; }

  static Scenario make(ModelSpec model, FunctionExpansion f, double t, double extension,
                       uint64_t n_replicates, uint64_t seed);
};

struct SampleRow {
  uint64_t replicate = 0;
  bool survived = false;
  bool capped = false;
  double w_t = 0;
  double statistic = 0;  // NaN when excluded
};

struct CheckResult {
  std::string name;
  bool pass = false;
  bool applicable = true;
  double value = 0;
  std::string detail;
};

struct EnsembleReport {
  Regime regime = Regime::small;
  double predicted_variance = 0;
  uint64_t n_replicates = 0, used = 0, extinct = 0, capped = 0;
  bool underpowered = false;
  KsResult ks;
  SampleMoments stat_moments;   // over used samples
  Correlation w_stat2_corr;     // independence diagnostic Cov(W, G^2)
  double centered_mean_se_ratio = 0;
  std::vector<CheckResult> checks;
  std::vector<SampleRow> samples;

  bool all_pass() const;
};

// Per-trajectory statistics (the theorem normalizations). The trajectory must
// carry a snapshot at the statistic time t; large-regime forms also need the
// final snapshot at t + Delta. nullopt = excluded (extinct at t).
std::optional<double> stat_small(const Trajectory& traj, const ModelSpec& model,
                                 const FunctionExpansion& f, double t);
std::optional<double> stat_critical(const Trajectory& traj, const ModelSpec& model,
                                    const FunctionExpansion& f, double t);
std::optional<double> stat_large(const Trajectory& traj, const ModelSpec& model,
                                 const FunctionExpansion& f, double t);
std::optional<double> stat_large_critical(const Trajectory& traj, const ModelSpec& model,
                                          const FunctionExpansion& f, double t);

/// Runs the replicate ensemble for a scenario and applies limit_law_tests.
EnsembleReport run_scenario(const Scenario& sc, const Thresholds& th, int threads);

/// The test battery: KS against N(0, predicted), variance ratio, skewness and
/// excess kurtosis, and the independence diagnostic corr(W_t, statistic^2).
EnsembleReport limit_law_tests(std::vector<SampleRow> samples, double predicted_variance,
                               const Thresholds& th);

struct L2Report {
  std::vector<double> times;
  std::vector<double> l2;  // empirical L2 distance per time
  std::vector<double> se;
  bool decreasing_up_to_se = false;
};

/// Theorem 1.2 diagnostic: L2 distance between e^{lambda_gamma t} <f, X_t> and
/// the level-gamma martingale combination proxied at T = max(times) + Delta.
L2Report theorem12_l2_check(const ModelSpec& model, const FunctionExpansion& f,
                            const std::vector<double>& times, double extension,
                            uint64_t n_replicates, uint64_t seed, int threads,
                            uint64_t pop_cap = 2'000'000);

}  // namespace bcl
