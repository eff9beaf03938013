#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "bcl/verify.hpp"

namespace bcl {

/// Parse failure with the offending line and field; maps to exit code 64.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, std::string field, const std::string& message)
      : std::runtime_error("config line " + std::to_string(line) + " [" + field +
                           "]: " + message),
        line_(line),
        field_(std::move(field)) {}
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// Flat, typed, line-oriented experiment description. Sections: [model],
/// [function], [scenario], [thresholds], [output]. Unknown keys are errors.
struct ExperimentConfig {
  // [model]
  double b = 1, sigma2 = 1;
  int d = 1;
  std::string beta_form = "const";            // const c | bump c | shifted_bump c0 c1
  std::vector<double> beta_params{1.0};
  std::string offspring_form = "table";       // table n:p ... | mix tableA / tableB
  std::vector<std::pair<int, double>> offspring_a{{2, 1.0}};
  std::vector<std::pair<int, double>> offspring_b;
  int k_max = 8, basis_n = 40, quad_order = 128;

  // [function]
  bool has_function = false;
  std::string function_form;                         // eigen | sum | poly
  std::vector<std::tuple<int, int, double>> function_pairs;  // 1-based levels
  std::vector<double> poly_coeffs;
  std::string expect_regime;  // optional: small | critical | large

  // [scenario]
  bool has_scenario = false;
  double t = 1, extension = -1;
  uint64_t replicates = 1000, pop_cap = 2'000'000, event_budget = 0, seed = 1;
  std::vector<double> x0;
  double survival_threshold = 0;
  std::vector<double> snapshots;

  // [thresholds]
  Thresholds thresholds;

  // [output]
  std::string out_dir = "out";
  int histogram_bins = 41;
  bool trajectory_csv = false;

  std::string raw_text;
  std::string hash_hex;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// FNV-1a 64 over the raw config text, hex-encoded.
std::string config_hash(const std::string& text);

ModelSpec build_model(const ExperimentConfig& cfg, bool allow_noncritical = false);
FunctionExpansion build_function(const ExperimentConfig& cfg, const ModelSpec& model);
Scenario build_scenario(const ExperimentConfig& cfg, ModelSpec model, FunctionExpansion f);

}  // namespace bcl
