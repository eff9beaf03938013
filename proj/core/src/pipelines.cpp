#include "bcl/pipelines.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include <nlohmann/json.hpp>

namespace bcl {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

ExperimentConfig with_overrides(ExperimentConfig cfg, const CliOptions& cli) {
  if (cli.seed) cfg.seed = *cli.seed;
  if (cli.replicates) cfg.replicates = *cli.replicates;
  if (cli.out_dir) cfg.out_dir = *cli.out_dir;
  if (cli.variance_scale) cfg.thresholds.variance_scale = *cli.variance_scale;
  return cfg;
}

void check_expected_regime(const ExperimentConfig& cfg, const ModelSpec& model,
                           const FunctionExpansion& f, std::ostream& out, bool& refused) {
  refused = false;
  if (cfg.expect_regime.empty()) return;
  const Regime actual = classify_regime(model, f);
  if (cfg.expect_regime != regime_name(actual)) {
    out << "refusal: config expects the " << cfg.expect_regime
        << " regime but (model, f) is in the " << regime_name(actual) << " regime\n";
    refused = true;
  }
}

ordered_json report_json(const ExperimentConfig& cfg, const EnsembleReport& rep) {
  ordered_json j;
  j["version"] = kVersion;
  j["config_hash"] = cfg.hash_hex;
  j["regime"] = regime_name(rep.regime);
  j["predicted_variance"] = rep.predicted_variance;
  j["replicates"] = rep.n_replicates;
  j["used"] = rep.used;
  j["extinct"] = rep.extinct;
  j["capped"] = rep.capped;
  j["underpowered"] = rep.underpowered;
  if (!rep.underpowered) {
    j["ks"] = {{"d", rep.ks.d}, {"p_value", rep.ks.p_value}};
    j["statistic"] = {
        {"mean", rep.stat_moments.mean},
        {"mean_se", rep.stat_moments.mean_se},
        {"variance", rep.stat_moments.variance},
        {"variance_se", rep.stat_moments.variance_se},
        {"skewness", rep.stat_moments.skewness},
        {"skewness_se", rep.stat_moments.skewness_se},
        {"excess_kurtosis", rep.stat_moments.excess_kurtosis},
        {"excess_kurtosis_se", rep.stat_moments.excess_kurtosis_se},
    };
    j["independence_corr"] = {{"r", rep.w_stat2_corr.r}, {"se", rep.w_stat2_corr.se}};
  }
  ordered_json checks = ordered_json::array();
  for (const auto& c : rep.checks)
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"applicable", c.applicable},
                      {"value", c.value},
                      {"detail", c.detail}});
  j["checks"] = checks;
  return j;
}

}  // namespace

void write_verify_outputs(const std::string& out_dir, const ExperimentConfig& cfg,
                          const EnsembleReport& rep, int histogram_bins) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  {
    std::ofstream js(fs::path(out_dir) / "report.json");
    js << report_json(cfg, rep).dump(2) << "\n";
  }
  {
    std::ofstream csv(fs::path(out_dir) / "samples.csv");
    csv << "# " << kVersion << " config=" << cfg.hash_hex << "\n";
    csv << "replicate,survived,capped,W_t,statistic\n";
    for (const auto& s : rep.samples)
      csv << s.replicate << ',' << (s.survived ? 1 : 0) << ',' << (s.capped ? 1 : 0) << ','
          << fmt(s.w_t) << ',' << fmt(s.statistic) << "\n";
  }
  {
    std::ofstream csv(fs::path(out_dir) / "histogram.csv");
    csv << "# " << kVersion << " config=" << cfg.hash_hex << "\n";
    csv << "bin_left,bin_right,count,predicted_density\n";
    const double v = rep.predicted_variance;
    const double sd = std::sqrt(std::max(v, 1e-300));
    const double lo = -5.0 * sd, hi = 5.0 * sd;
    const int nb = std::max(histogram_bins, 3);
    std::vector<uint64_t> counts(nb, 0);
    for (const auto& s : rep.samples) {
      if (!s.survived || s.capped || !std::isfinite(s.statistic)) continue;
      const int bin = static_cast<int>((s.statistic - lo) / (hi - lo) * nb);
      if (bin >= 0 && bin < nb) ++counts[bin];
    }
    for (int i = 0; i < nb; ++i) {
      const double left = lo + (hi - lo) * i / nb;
      const double right = lo + (hi - lo) * (i + 1) / nb;
      const double mid = 0.5 * (left + right);
      const double density = std::exp(-0.5 * mid * mid / v) / (sd * std::sqrt(2.0 * M_PI));
      csv << fmt(left) << ',' << fmt(right) << ',' << counts[i] << ',' << fmt(density)
          << "\n";
    }
  }
}

int cmd_spectrum(const ExperimentConfig& cfg_in, const CliOptions& cli, std::ostream& out) {
  const ExperimentConfig cfg = with_overrides(cfg_in, cli);
  const ModelSpec model = build_model(cfg, /*allow_noncritical=*/true);
  const auto& basis = *model.basis;

  out << kVersion << " spectrum  config=" << cfg.hash_hex << "\n";
  out << "source: "
      << (basis.source == SpectralBasis::Source::closed_form ? "closed_form" : "galerkin")
      << "  lambda_1=" << fmt(model.lambda1)
      << (model.supercritical ? "  (supercritical)" : "  (NOT supercritical)") << "\n";
  out << std::setw(4) << "k" << std::setw(16) << "lambda_k" << std::setw(6) << "n_k"
      << std::setw(18) << "2*lambda_k-l1" << std::setw(10) << "regime" << "\n";
  for (int k = 0; k < basis.levels(); ++k) {
    const Regime r = classify_regime(basis.lambda[0], basis.lambda[k]);
    out << std::setw(4) << (k + 1) << std::setw(16) << fmt(basis.lambda[k]) << std::setw(6)
        << basis.mult[k] << std::setw(18) << fmt(2 * basis.lambda[k] - basis.lambda[0])
        << std::setw(10) << regime_name(r) << "\n";
  }
  if (basis.source == SpectralBasis::Source::galerkin)
    out << "max eigen-residual: " << fmt(basis.galerkin_max_residual) << "\n";
  return kExitPass;
}

int cmd_variance(const ExperimentConfig& cfg_in, const CliOptions& cli, std::ostream& out) {
  const ExperimentConfig cfg = with_overrides(cfg_in, cli);
  const ModelSpec model = build_model(cfg, /*allow_noncritical=*/true);
  if (!model.supercritical)
    out << "warning: model is not supercritical (lambda_1 = " << fmt(model.lambda1)
        << "); variances are formal evaluations, the limit theorems do not apply\n";
  const FunctionExpansion f = build_function(cfg, model);

  bool refused = false;
  check_expected_regime(cfg, model, f, out, refused);
  if (refused) return kExitFail;

  const Regime regime = classify_regime(model, f);
  out << kVersion << " variance  config=" << cfg.hash_hex << "\n";
  out << "gamma(f) = " << (f.gamma_level + 1) << ", regime = " << regime_name(regime)
      << "\n";

  switch (regime) {
    case Regime::small: {
      const double closed = sigma2_small(model, f);
      const double quad = sigma2_small_quadrature(model, f);
      out << "sigma_f^2 = " << fmt(closed) << "  (quadrature route " << fmt(quad)
          << ", diff " << fmt(std::abs(closed - quad)) << ")\n";
      break;
    }
    case Regime::critical: {
      out << "rho_f^2 = " << fmt(rho2_critical(model, f)) << "\n";
      break;
    }
    case Regime::large: {
      const FunctionExpansion fsplit = f.split ? f : split(f);
      if (fsplit.split->critical.gamma_level >= 0) {
        out << "f_(c) != 0 (Theorem 2.3 applies): rho_{f_(c)}^2 = "
            << fmt(rho2_critical(model, fsplit.split->critical)) << "\n";
      } else {
        const double b2 = beta2_large(model, f);
        const auto& fl = fsplit.split->large;
        const double s2 = fl.gamma_level >= 0 ? sigma2_small(model, fl) : 0.0;
        out << "beta_f^2 = " << fmt(b2) << ", sigma_{f_(l)}^2 = " << fmt(s2)
            << ", total = " << fmt(b2 + s2) << "\n";
      }
      std::vector<double> x0(model.ou.d, 0.0);
      if (!cfg.x0.empty() && static_cast<int>(cfg.x0.size()) == model.ou.d) x0 = cfg.x0;
      out << "eta_f^2(x0) = " << fmt(eta2_large(model, f, x0.data())) << "\n";
      break;
    }
  }
  if (model.supercritical)
    out << "remark phi_1 variance <A phi1^2, phi1>/(-lambda_1) = "
        << fmt(remark_phi1_variance(model)) << "\n";
  return kExitPass;
}

int cmd_simulate(const ExperimentConfig& cfg_in, const CliOptions& cli, std::ostream& out) {
  const ExperimentConfig cfg = with_overrides(cfg_in, cli);
  if (!cfg.has_scenario) throw ConfigError(0, "scenario", "missing [scenario] section");
  const ModelSpec model = build_model(cfg, /*allow_noncritical=*/true);
  if (!model.supercritical)
    out << "note: model is not supercritical (lambda_1 = " << fmt(model.lambda1) << ")\n";

  std::vector<double> snaps = cfg.snapshots;
  if (snaps.empty()) snaps = {cfg.t};
  std::sort(snaps.begin(), snaps.end());

  SimConfig sim;
  sim.horizon = snaps.back();
  sim.snapshot_times = snaps;
  sim.pop_cap = cfg.pop_cap;
  sim.event_budget = cfg.event_budget;
  sim.rng_seed = cfg.seed;

  Configuration init;
  init.dim = model.ou.d;
  init.coords = cfg.x0.empty() ? std::vector<double>(model.ou.d, 0.0) : cfg.x0;

  const uint64_t n = cfg.replicates;
  std::vector<Trajectory> trajs(n);
  for_each_replicate(n, cli.threads, [&](uint64_t rep) {
    Rng rng = Rng::stream(cfg.seed, rep);
    trajs[rep] = simulate(model, init, sim, rng);
  });

  uint64_t capped = 0, extinct = 0;
  for (const auto& tr : trajs) {
    capped += tr.capped;
    extinct += tr.extinct;
  }
  out << kVersion << " simulate  config=" << cfg.hash_hex << "\n";
  out << "replicates=" << n << " capped=" << capped << " extinct=" << extinct << "\n";
  if (capped == n) out << "WARNING: every replicate hit pop_cap; results unusable\n";

  for (size_t si = 0; si < snaps.size(); ++si) {
    double mean_count = 0, mean_w = 0;
    uint64_t used = 0;
    for (const auto& tr : trajs) {
      if (tr.capped) continue;
      mean_count += static_cast<double>(tr.snapshots[si].count());
      mean_w += martingale_W(tr.snapshots[si], model);
      ++used;
    }
    if (used) {
      mean_count /= used;
      mean_w /= used;
    }
    out << "t=" << fmt(snaps[si]) << "  mean_count=" << fmt(mean_count)
        << "  mean_W=" << fmt(mean_w) << "  (over " << used << " uncapped)\n";
  }

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  if (cfg.trajectory_csv) {
    std::ofstream csv(fs::path(cfg.out_dir) / "trajectory.csv");
    csv << "# " << kVersion << " config=" << cfg.hash_hex << "\n";
    csv << "replicate,snapshot_time,particle_index";
    for (int c = 0; c < model.ou.d; ++c) csv << ",x" << c;
    csv << "\n";
    for (uint64_t rep = 0; rep < n; ++rep) {
      if (trajs[rep].capped) continue;
      for (size_t si = 0; si < trajs[rep].snapshots.size(); ++si) {
        const Configuration& c = trajs[rep].snapshots[si];
        for (size_t i = 0; i < c.count(); ++i) {
          csv << rep << ',' << fmt(c.t) << ',' << i;
          for (int k = 0; k < c.dim; ++k) csv << ',' << fmt(c.at(i)[k]);
          csv << "\n";
        }
      }
    }
  }
  return kExitPass;
}

int cmd_verify(const ExperimentConfig& cfg_in, const CliOptions& cli, std::ostream& out) {
  const ExperimentConfig cfg = with_overrides(cfg_in, cli);
  const ModelSpec model = build_model(cfg);
  const FunctionExpansion f = build_function(cfg, model);

  bool refused = false;
  check_expected_regime(cfg, model, f, out, refused);
  if (refused) return kExitFail;

  Scenario sc = build_scenario(cfg, model, f);
  const EnsembleReport rep = run_scenario(sc, cfg.thresholds, cli.threads);
  write_verify_outputs(cfg.out_dir, cfg, rep, cfg.histogram_bins);

  out << kVersion << " verify  config=" << cfg.hash_hex << "\n";
  out << "regime=" << regime_name(rep.regime)
      << " predicted_variance=" << fmt(rep.predicted_variance) << "\n";
  out << "replicates=" << rep.n_replicates << " used=" << rep.used
      << " extinct=" << rep.extinct << " capped=" << rep.capped << "\n";
  for (const auto& c : rep.checks)
    out << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";

  if (rep.underpowered) {
    out << "verdict: UNDERPOWERED\n";
    return kExitUnderpowered;
  }
  const bool pass = rep.all_pass();
  out << "verdict: " << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitPass : kExitFail;
}

}  // namespace bcl
