#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bcl/pipelines.hpp"

using namespace bcl;

namespace {

const std::string kPresets = BCL_PRESET_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_tool(const std::string& args) {
  const std::string cmd = std::string(BCL_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

ExperimentConfig preset(const std::string& name) {
  return load_config_file(kPresets + "/" + name);
}

}  // namespace

TEST_CASE("config parses a preset and hashes deterministically") {
  const auto cfg = preset("theorem13.cfg");
  CHECK(cfg.b == 1.0);
  CHECK(cfg.beta_form == "const");
  CHECK(cfg.offspring_a.size() == 2);
  CHECK(cfg.t == 12.0);
  CHECK(cfg.replicates == 5600);
  CHECK(cfg.thresholds.min_samples == 4000);
  CHECK(cfg.hash_hex.size() == 16);
  CHECK(cfg.hash_hex == parse_config_text(cfg.raw_text).hash_hex);
  CHECK(cfg.hash_hex != parse_config_text(cfg.raw_text + "\n# x").hash_hex);
}

TEST_CASE("unknown keys and malformed lines carry line diagnostics") {
  try {
    parse_config_text("[model]\nb = 1\nbogus_key = 3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(e.field() == "bogus_key");
  }
  CHECK_THROWS_AS(parse_config_text("[nosuch]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[model]\nb = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("b = 1\n"), ConfigError);           // outside section
  CHECK_THROWS_AS(parse_config_text("[model]\nb 1\n"), ConfigError);    // missing '='
  CHECK_THROWS_AS(parse_config_text("[model]\noffspring = table\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[model]\nbeta = wiggle 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[function]\nform = eigen 2\n"), ConfigError);
}

TEST_CASE("build_model derives the preset spectra") {
  const auto m13 = build_model(preset("theorem13.cfg"));
  CHECK(m13.lambda1 == doctest::Approx(-0.6));
  CHECK(m13.supercritical);
  const auto m23 = build_model(preset("theorem23.cfg"));
  CHECK(m23.lambda1 == doctest::Approx(-3.0));
  CHECK(m23.basis->lambda[3] == doctest::Approx(-1.5));
}

TEST_CASE("mix offspring tables interpolate pointwise") {
  const auto cfg = parse_config_text(
      "[model]\nb = 1\nsigma2 = 1\nd = 1\nbeta = const 1\n"
      "offspring = mix 0:0.2 2:0.8 / 4:1.0\nk_max = 5\nbasis_n = 30\n");
  const auto m = build_model(cfg);
  CHECK(m.basis->source == SpectralBasis::Source::galerkin);
  const double far = 6.0, origin = 0.0;
  // at the origin w = 1: the first table; far out w ~ 0: the second
  CHECK(m.mech.mean_offspring(&origin) == doctest::Approx(1.6).epsilon(1e-9));
  CHECK(m.mech.mean_offspring(&far) == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("cmd_spectrum prints closed-form and galerkin tables") {
  std::ostringstream out;
  CliOptions cli;
  CHECK(cmd_spectrum(preset("theorem13.cfg"), cli, out) == kExitPass);
  CHECK(out.str().find("closed_form") != std::string::npos);
  CHECK(out.str().find("-0.6") != std::string::npos);
  CHECK(out.str().find("supercritical") != std::string::npos);

  std::ostringstream out2;
  CHECK(cmd_spectrum(preset("spectrum_bump.cfg"), cli, out2) == kExitPass);
  CHECK(out2.str().find("galerkin") != std::string::npos);
  CHECK(out2.str().find("eigen-residual") != std::string::npos);
}

TEST_CASE("cmd_variance prints the three regime predictions") {
  CliOptions cli;
  {
    std::ostringstream out;
    CHECK(cmd_variance(preset("theorem13.cfg"), cli, out) == kExitPass);
    CHECK(out.str().find("regime = small") != std::string::npos);
    CHECK(out.str().find("2.142857142857") != std::string::npos);  // 15/7
  }
  {
    std::ostringstream out;
    CHECK(cmd_variance(preset("theorem14.cfg"), cli, out) == kExitPass);
    CHECK(out.str().find("regime = critical") != std::string::npos);
    CHECK(out.str().find("rho_f^2 = 4") != std::string::npos);
  }
  {
    std::ostringstream out;
    CHECK(cmd_variance(preset("theorem21.cfg"), cli, out) == kExitPass);
    CHECK(out.str().find("regime = large") != std::string::npos);
    CHECK(out.str().find("beta_f^2 = 3") != std::string::npos);
  }
  {
    std::ostringstream out;
    CHECK(cmd_variance(preset("theorem23.cfg"), cli, out) == kExitPass);
    CHECK(out.str().find("rho_{f_(c)}^2 = 12") != std::string::npos);
  }
}

TEST_CASE("cmd_variance handles the non-supercritical A == 0 config") {
  std::ostringstream out;
  CliOptions cli;
  CHECK(cmd_variance(preset("variance_nobranch.cfg"), cli, out) == kExitPass);
  CHECK(out.str().find("not supercritical") != std::string::npos);
  CHECK(out.str().find("sigma_f^2 = 1") != std::string::npos);  // <f^2, phi_1> only
}

TEST_CASE("cmd_variance refuses a regime-mismatched request") {
  auto cfg = preset("theorem13.cfg");
  cfg.expect_regime = "critical";
  std::ostringstream out;
  CliOptions cli;
  CHECK(cmd_variance(cfg, cli, out) == kExitFail);
  CHECK(out.str().find("refusal") != std::string::npos);
}

TEST_CASE("cmd_simulate: no branching keeps the population constant") {
  const auto cfg = parse_config_text(
      "[model]\nb = 1\nsigma2 = 1\nd = 1\nbeta = const 0\noffspring = table 2:1.0\n"
      "k_max = 4\n[scenario]\nt = 2\nreplicates = 40\nsnapshots = 1 2\nseed = 9\n"
      "[output]\ndirectory = out/test_sim_nobranch\n");
  std::ostringstream out;
  CliOptions cli;
  cli.threads = 2;
  CHECK(cmd_simulate(cfg, cli, out) == kExitPass);
  CHECK(out.str().find("mean_count=1 ") != std::string::npos);
  CHECK(out.str().find("capped=0") != std::string::npos);
}

TEST_CASE("cmd_simulate: Yule mean count and loud capping") {
  {
    auto cfg = parse_config_text(
        "[model]\nb = 1\nsigma2 = 1\nd = 1\nbeta = const 2\noffspring = table 2:1.0\n"
        "k_max = 4\n[scenario]\nt = 1\nreplicates = 2000\nseed = 31\n"
        "[output]\ndirectory = out/test_sim_yule\n");
    std::ostringstream out;
    CliOptions cli;
    cli.threads = 2;
    CHECK(cmd_simulate(cfg, cli, out) == kExitPass);
    const auto s = out.str();
    const auto pos = s.find("mean_count=");
    REQUIRE(pos != std::string::npos);
    const double mean = std::atof(s.c_str() + pos + 11);
    CHECK(std::abs(mean - std::exp(2.0)) < 4 * 6.9 / std::sqrt(2000.0));
  }
  {
    auto cfg = parse_config_text(
        "[model]\nb = 1\nsigma2 = 1\nd = 1\nbeta = const 2\noffspring = table 2:1.0\n"
        "k_max = 4\n[scenario]\nt = 3\nreplicates = 50\npop_cap = 1\nseed = 32\n"
        "[output]\ndirectory = out/test_sim_capped\n");
    std::ostringstream out;
    CliOptions cli;
    CHECK(cmd_simulate(cfg, cli, out) == kExitPass);
    CHECK(out.str().find("WARNING: every replicate hit pop_cap") != std::string::npos);
  }
}

TEST_CASE("cmd_simulate writes the trajectory dump when asked") {
  const auto cfg = parse_config_text(
      "[model]\nb = 1\nsigma2 = 1\nd = 1\nbeta = const 1\noffspring = table 0:0.2 2:0.8\n"
      "k_max = 4\n[scenario]\nt = 1\nreplicates = 5\nsnapshots = 0.5 1\nseed = 77\n"
      "[output]\ndirectory = out/test_traj\ntrajectory_csv = true\n");
  std::ostringstream out;
  CliOptions cli;
  CHECK(cmd_simulate(cfg, cli, out) == kExitPass);
  const std::string csv = slurp("out/test_traj/trajectory.csv");
  CHECK(csv.find("replicate,snapshot_time,particle_index,x0") != std::string::npos);
  CHECK(csv.find("config=" + cfg.hash_hex) != std::string::npos);
}

TEST_CASE("cmd_verify: pass, override-fail, and underpowered exit codes") {
  auto cfg = preset("negative_control.cfg");
  cfg.replicates = 900;
  CliOptions cli;
  cli.threads = 2;
  {
    std::ostringstream out;
    cli.out_dir = "out/test_verify_pass";
    CHECK(cmd_verify(cfg, cli, out) == kExitPass);
    CHECK(out.str().find("verdict: PASS") != std::string::npos);
  }
  {
    std::ostringstream out;
    CliOptions cli4 = cli;
    cli4.variance_scale = 4.0;
    cli4.out_dir = "out/test_verify_x4";
    CHECK(cmd_verify(cfg, cli4, out) == kExitFail);
    CHECK(out.str().find("FAIL variance_ratio") != std::string::npos);
  }
  {
    std::ostringstream out;
    CliOptions cli20 = cli;
    cli20.replicates = 20;
    cli20.out_dir = "out/test_verify_under";
    CHECK(cmd_verify(cfg, cli20, out) == kExitUnderpowered);
    CHECK(out.str().find("UNDERPOWERED") != std::string::npos);
  }
}

TEST_CASE("cmd_verify outputs are byte-identical across thread counts") {
  auto cfg = preset("theorem13.cfg");
  cfg.replicates = 60;
  cfg.thresholds.min_samples = 10;
  CliOptions one;
  one.threads = 1;
  one.out_dir = "out/test_det_1";
  CliOptions eight;
  eight.threads = 8;
  eight.out_dir = "out/test_det_8";
  std::ostringstream o1, o8;
  cmd_verify(cfg, one, o1);
  cmd_verify(cfg, eight, o8);
  CHECK(slurp("out/test_det_1/samples.csv") == slurp("out/test_det_8/samples.csv"));
  CHECK(slurp("out/test_det_1/report.json") == slurp("out/test_det_8/report.json"));
  CHECK(slurp("out/test_det_1/histogram.csv") == slurp("out/test_det_8/histogram.csv"));
}

TEST_CASE("report files embed version and config hash") {
  const std::string rep = slurp("out/test_verify_pass/report.json");
  CHECK(rep.find(kVersion) != std::string::npos);
  const auto cfg = preset("negative_control.cfg");
  CHECK(rep.find(cfg.hash_hex) != std::string::npos);
  const std::string samples = slurp("out/test_verify_pass/samples.csv");
  CHECK(samples.find("replicate,survived,capped,W_t,statistic") != std::string::npos);
  CHECK(samples.find(cfg.hash_hex) != std::string::npos);
}

TEST_CASE("the installed binary maps config errors to exit 64") {
  namespace fs = std::filesystem;
  fs::create_directories("out");
  {
    std::ofstream bad("out/bad config.cfg");
    bad << "[model]\nb = 1\nmystery = 2\n";
  }
  CHECK(run_tool("spectrum --config 'out/bad config.cfg'") == 64);
  CHECK(run_tool("verify --config /nonexistent.cfg") == 64);
  CHECK(run_tool(std::string("spectrum --config ") + kPresets + "/theorem13.cfg") == 0);
  // verify without a [function] section is a config error
  {
    std::ofstream nf("out/nofunction.cfg");
    nf << "[model]\nb = 1\nsigma2 = 1\nd = 1\nbeta = const 2\noffspring = table 2:1.0\n"
          "[scenario]\nt = 1\nreplicates = 10\n";
  }
  CHECK(run_tool("verify --config out/nofunction.cfg") == 64);
}
