#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bcl/moments.hpp"
#include "bcl/rng.hpp"

namespace bcl {

/// Particle system at one time: a finite list of positions (empty = extinct).
struct Configuration {
  double t = 0;
  int dim = 1;
  std::vector<double> coords;  // flattened, dim per particle

  size_t count() const { return dim > 0 ? coords.size() / dim : 0; }
  const double* at(size_t i) const { return coords.data() + i * dim; }
  void push(const double* x) { coords.insert(coords.end(), x, x + dim); }
};

struct SimConfig {
  double horizon = 1.0;
  std::vector<double> snapshot_times;  // ascending, within [0, horizon]
  uint64_t pop_cap = 2'000'000;
  uint64_t rng_seed = 1;
  double thinning_bound = 0;  // B >= sup beta; 0 = use model beta_sup
  uint64_t event_budget = 0;  // 0 = derived (64 * pop_cap + 1e6)

  void validate(const ModelSpec& model) const;
  uint64_t effective_event_budget() const {
    return event_budget ? event_budget : 64 * pop_cap + 1'000'000;
  }
};

struct Trajectory {
  std::vector<double> snapshot_times;
  std::vector<Configuration> snapshots;
  bool extinct = false;
  bool capped = false;       // aborted at pop_cap/event budget; snapshots dropped
  uint64_t event_count = 0;  // accepted branch events
};

/// Exact OU transition: coordinatewise mean x e^{-b dt},
/// variance sigma2 (1 - e^{-2 b dt}) / (2b). dt = 0 returns x.
void ou_transition(const double* x, double dt, const OUParams& params, Rng& rng,
                   double* out);
std::vector<double> ou_transition(const std::vector<double>& x, double dt,
                                  const OUParams& params, Rng& rng);

/// Event-driven exact simulation (thinning against the constant bound B).
/// Deterministic given the rng state. Population above pop_cap or event budget
/// marks the trajectory capped.
Trajectory simulate(const ModelSpec& model, const Configuration& init, const SimConfig& cfg,
                    Rng& rng);

/// Linear functionals accumulated at snapshot times without materializing
/// configurations: each row is a coefficient vector over the eigenfunction
/// pairs of the model basis, evaluated per particle via one Hermite table.
class FunctionalSet {
 public:
  FunctionalSet(const BasisPtr& basis, std::vector<std::vector<double>> pair_rows);
  /// Row from an expansion's coefficients.
  static std::vector<double> row_of(const FunctionExpansion& f) { return f.coeffs; }
  /// Row selecting a single eigenfunction pair.
  static std::vector<double> row_of_pair(const BasisPtr& basis, int level, int j);

  int rows() const { return static_cast<int>(tensor_rows_.size()); }
  int max_degree() const { return max_degree_; }
  /// Evaluate all rows at x; adds into acc[0..rows).
  void accumulate(const double* x, double* acc) const;

 private:
  OUParams ou_;
  int max_degree_ = 0;
  std::vector<MultiIndex> tensor_;                // restricted to max_degree_
  std::vector<std::vector<double>> tensor_rows_;  // rows over tensor_ entries
};

struct StreamStats {
  std::vector<double> snapshot_times;
  std::vector<uint64_t> counts;            // particles per snapshot
  std::vector<std::vector<double>> sums;   // [snapshot][row]
  bool capped = false;
  uint64_t event_count = 0;
};

/// Streaming counterpart of simulate(): same event law, O(tree depth) memory.
StreamStats run_functionals(const ModelSpec& model, const Configuration& init,
                            const SimConfig& cfg, const FunctionalSet& funcs, Rng& rng);

/// <f, X_t> = sum of f over particles; 0 on the empty configuration.
double functional(const Configuration& config,
                  const std::function<double(const double*)>& f);

/// W_t = e^{lambda_1 t} <phi_1, X_t>.
double martingale_W(const Configuration& config, const ModelSpec& model);

/// H_t^{k,j} = e^{lambda_k t} <phi_j^{(k)}, X_t>; level/j are 0-based.
double martingale_H(const Configuration& config, const ModelSpec& model, int level, int j);

/// Survival proxy for the non-extinction event: final snapshot population > 0
/// and terminal W >= threshold. nullopt for capped trajectories (indeterminate).
std::optional<bool> survival_indicator(const Trajectory& traj, const ModelSpec& model,
                                       double threshold = 0.0);

/// Replicate-parallel driver: body(replicate_index) invoked once per replicate,
/// work-stolen over `threads` threads. Callers write into per-replicate slots,
/// so output order is deterministic regardless of thread count.
void for_each_replicate(uint64_t n_replicates, int threads,
                        const std::function<void(uint64_t)>& body);

}  // namespace bcl
