#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "bcl/pipelines.hpp"

namespace {

int threads_default() {
  if (const char* env = std::getenv("BCL_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;  // hardware default
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"branching OU central-limit laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  bcl::CliOptions cli;
  cli.threads = threads_default();

  uint64_t seed = 0, replicates = 0;
  std::string out_dir;
  double variance_scale = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--seed", seed, "override [scenario] seed");
    sub->add_option("--threads", cli.threads, "worker threads (env BCL_THREADS)");
    sub->add_option("--out", out_dir, "override output directory");
    sub->add_option("--replicates", replicates, "override replicate count");
  };

  CLI::App* spectrum = app.add_subcommand("spectrum", "print the eigenvalue table");
  add_common(spectrum);
  CLI::App* variance = app.add_subcommand("variance", "print predicted limit variances");
  add_common(variance);
  CLI::App* simulate = app.add_subcommand("simulate", "run trajectories, print summary");
  add_common(simulate);
  CLI::App* verify = app.add_subcommand("verify", "run the limit-law verification pipeline");
  add_common(verify);
  verify->add_option("--variance-scale", variance_scale,
                     "scale the predicted variance (negative-control knob)");

  CLI11_PARSE(app, argc, argv);

  try {
    const bcl::ExperimentConfig cfg = bcl::load_config_file(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) cli.seed = seed;
    if (sub->count("--replicates")) cli.replicates = replicates;
    if (sub->count("--out")) cli.out_dir = out_dir;
    if (sub == verify && verify->count("--variance-scale"))
      cli.variance_scale = variance_scale;

    if (sub == spectrum) return bcl::cmd_spectrum(cfg, cli, std::cout);
    if (sub == variance) return bcl::cmd_variance(cfg, cli, std::cout);
    if (sub == simulate) return bcl::cmd_simulate(cfg, cli, std::cout);
    return bcl::cmd_verify(cfg, cli, std::cout);
  } catch (const bcl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return bcl::kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return bcl::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return bcl::kExitFail;
  }
}
