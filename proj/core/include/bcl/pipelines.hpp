#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "bcl/config.hpp"

namespace bcl {

inline constexpr const char* kVersion = "bcl 0.1.0";

// Exit codes: 0 pass, 1 fail, 2 underpowered/indeterminate, 64 config error.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUnderpowered = 2;
inline constexpr int kExitConfig = 64;

struct CliOptions {
  std::optional<uint64_t> seed;
  std::optional<uint64_t> replicates;
  std::optional<std::string> out_dir;
  std::optional<double> variance_scale;
  int threads = 0;  // 0 = hardware default
};

int cmd_spectrum(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out);
int cmd_variance(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out);
int cmd_simulate(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out);
int cmd_verify(const ExperimentConfig& cfg, const CliOptions& cli, std::ostream& out);

/// Writes report.json, samples.csv and histogram.csv for an ensemble run.
void write_verify_outputs(const std::string& out_dir, const ExperimentConfig& cfg,
                          const EnsembleReport& report, int histogram_bins);

}  // namespace bcl
