#include "bcl/particle.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace bcl {

void SimConfig::validate(const ModelSpec& model) const {
  if (pop_cap < 1) throw std::invalid_argument("SimConfig: pop_cap must be >= 1");
  if (snapshot_times.empty())
    throw std::invalid_argument("SimConfig: need at least one snapshot time");
  double prev = -1;
  for (double s : snapshot_times) {
    if (!(s >= 0) || s > horizon + 1e-12)
      throw std::invalid_argument("SimConfig: snapshot times must lie in [0, horizon]");
    if (s <= prev) throw std::invalid_argument("SimConfig: snapshot times must ascend");
    prev = s;
  }
  const double bound = thinning_bound > 0 ? thinning_bound : model.mech.beta_sup;
  // probe grid check of the thinning bound: axis-aligned uniform grid over
  // +-8 stationary sd per coordinate
  const double s = model.ou.stationary_sd();
  double x[kMaxDim] = {0, 0, 0, 0};
  if (model.mech.beta(x) > bound * (1 + 1e-12))
    throw std::invalid_argument("SimConfig: thinning_bound below beta on probe grid");
  for (int c = 0; c < model.ou.d; ++c) {
    for (int i = 0; i < 64; ++i) {
      for (int k = 0; k < model.ou.d; ++k) x[k] = 0;
      x[c] = -8 * s + i * (16 * s / 63.0);
      if (model.mech.beta(x) > bound * (1 + 1e-12))
        throw std::invalid_argument("SimConfig: thinning_bound below beta on probe grid");
    }
  }
}

void ou_transition(const double* x, double dt, const OUParams& params, Rng& rng,
                   double* out) {
  if (dt < 0) throw std::invalid_argument("ou_transition: dt must be >= 0");
  if (dt == 0) {
    for (int c = 0; c < params.d; ++c) out[c] = x[c];
    return;
  }
  const double m = std::exp(-params.b * dt);
  const double sd = std::sqrt(params.sigma2 * (1.0 - m * m) / (2.0 * params.b));
  for (int c = 0; c < params.d; ++c) out[c] = x[c] * m + sd * rng.next_normal();
}

std::vector<double> ou_transition(const std::vector<double>& x, double dt,
                                  const OUParams& params, Rng& rng) {
  std::vector<double> out(x.size());
  ou_transition(x.data(), dt, params, rng, out.data());
  return out;
}

namespace {

struct OffspringSampler {
  const BranchingMechanism* mech;
  bool constant;
  std::vector<double> cdf;  // constant case

  explicit OffspringSampler(const BranchingMechanism& m) : mech(&m) {
    constant = m.spatially_constant;
    if (constant) {
      std::vector<double> pmf(m.n_max + 1);
      const double origin[kMaxDim] = {0, 0, 0, 0};
      m.offspring(origin, pmf);
      cdf.resize(pmf.size());
      double acc = 0;
      for (size_t n = 0; n < pmf.size(); ++n) {
        acc += pmf[n];
        cdf[n] = acc;
      }
    }
  }

  int sample(const double* x, Rng& rng) const {
    const double u = rng.next_unit();
    if (constant) {
      for (size_t n = 0; n < cdf.size(); ++n)
        if (u <= cdf[n]) return static_cast<int>(n);
      return static_cast<int>(cdf.size()) - 1;
    }
    std::vector<double> pmf(mech->n_max + 1);
    mech->offspring(x, pmf);
    double acc = 0;
    for (size_t n = 0; n < pmf.size(); ++n) {
      acc += pmf[n];
      if (u <= acc) return static_cast<int>(n);
    }
    return mech->n_max;
  }
};

struct Pending {
  double pos[kMaxDim];
  double t;
  int next_snap;
};

/// Depth-first event loop shared by both sinks. Sink interface:
///   void at_snapshot(int snap, const double* x)
/// Returns false when capped (population at a snapshot exceeded pop_cap or the
/// event budget ran out).
template <class Sink>
bool dfs_engine(const ModelSpec& model, const Configuration& init,
                const std::vector<double>& snaps, double bound_B, uint64_t pop_cap,
                uint64_t event_budget, Rng& rng, Sink&& sink,
                std::vector<uint64_t>& counts, uint64_t& events) {
  const OUParams& ou = model.ou;
  const double b = ou.b;
  const double var_inf = ou.sigma2 / (2.0 * b);
  const int d = ou.d;
  const int n_snaps = static_cast<int>(snaps.size());
  const OffspringSampler offspring(model.mech);
  const bool beta_const = model.mech.spatially_constant;
  const double beta0 = beta_const ? model.mech.beta(init.at(0)) : 0.0;
  const bool always_accept = beta_const && beta0 >= bound_B * (1 - 1e-15);

  counts.assign(n_snaps, 0);
  events = 0;

  std::vector<Pending> stack;
  stack.reserve(256);
  for (size_t i = init.count(); i-- > 0;) {
    Pending p{};
    for (int c = 0; c < d; ++c) p.pos[c] = init.at(i)[c];
    p.t = 0;
    p.next_snap = 0;
    stack.push_back(p);
  }

  while (!stack.empty()) {
    Pending p = stack.back();
    stack.pop_back();
    for (;;) {
      const double t_next = p.t + rng.next_exponential() / bound_B;
      // advance through any snapshots before the next proposal
      while (p.next_snap < n_snaps && snaps[p.next_snap] <= t_next) {
        const double dt = snaps[p.next_snap] - p.t;
        if (dt > 0) {
          const double m = std::exp(-b * dt);
          const double sd = std::sqrt(var_inf * (1.0 - m * m));
          for (int c = 0; c < d; ++c) p.pos[c] = p.pos[c] * m + sd * rng.next_normal();
          p.t = snaps[p.next_snap];
        }
        sink.at_snapshot(p.next_snap, p.pos);
        if (++counts[p.next_snap] > pop_cap) return false;
        ++p.next_snap;
      }
      if (p.next_snap >= n_snaps) break;  // particle recorded at every snapshot

      // advance to the proposal and thin
      {
        const double dt = t_next - p.t;
        const double m = std::exp(-b * dt);
        const double sd = std::sqrt(var_inf * (1.0 - m * m));
        for (int c = 0; c < d; ++c) p.pos[c] = p.pos[c] * m + sd * rng.next_normal();
        p.t = t_next;
      }
      bool accept = always_accept;
      if (!accept) {
        const double beta_x = model.mech.beta(p.pos);
        if (beta_x > bound_B * (1 + 1e-12))
          throw std::runtime_error(
              "simulate: sampled beta exceeds thinning bound; simulation not exact");
        accept = rng.next_unit() * bound_B <= beta_x;
      }
      if (!accept) continue;  // memoryless: redraw the lifetime

      if (++events > event_budget) return false;
      const int n = offspring.sample(p.pos, rng);
      if (n == 0) break;  // death
      for (int child = 1; child < n; ++child) stack.push_back(p);
      // continue as the first child
    }
  }
  return true;
}

struct RecorderSink {
  std::vector<Configuration>* snapshots;
  void at_snapshot(int snap, const double* x) { (*snapshots)[snap].push(x); }
};

struct AccumulatorSink {
  const FunctionalSet* funcs;
  std::vector<std::vector<double>>* sums;
  void at_snapshot(int snap, const double* x) {
    funcs->accumulate(x, (*sums)[snap].data());
  }
};

}  // namespace

Trajectory simulate(const ModelSpec& model, const Configuration& init, const SimConfig& cfg,
                    Rng& rng) {
  if (init.dim != model.ou.d) throw std::invalid_argument("simulate: dimension mismatch");
  if (init.t != 0) throw std::invalid_argument("simulate: init.t must be 0");
  cfg.validate(model);

  Trajectory traj;
  traj.snapshot_times = cfg.snapshot_times;
  traj.snapshots.assign(cfg.snapshot_times.size(), Configuration{});
  for (size_t i = 0; i < traj.snapshots.size(); ++i) {
    traj.snapshots[i].t = cfg.snapshot_times[i];
    traj.snapshots[i].dim = model.ou.d;
  }
  if (init.count() == 0) {
    traj.extinct = true;
    return traj;
  }

  const double bound = cfg.thinning_bound > 0 ? cfg.thinning_bound : model.mech.beta_sup;
  std::vector<uint64_t> counts;
  RecorderSink sink{&traj.snapshots};
  const bool ok = dfs_engine(model, init, cfg.snapshot_times, bound, cfg.pop_cap,
                             cfg.effective_event_budget(), rng, sink, counts,
                             traj.event_count);
  if (!ok) {
    traj.capped = true;
    traj.snapshots.clear();  // no complete configuration exists at any snapshot
    traj.snapshot_times.clear();
    return traj;
  }
  traj.extinct = counts.empty() ? true : counts.back() == 0;
  return traj;
}

FunctionalSet::FunctionalSet(const BasisPtr& basis,
                             std::vector<std::vector<double>> pair_rows) {
  ou_ = basis->ou;
  // restrict to the degrees actually used
  int max_deg = 0;
  for (const auto& row : pair_rows) {
    if (row.size() != static_cast<size_t>(basis->pairs()))
      throw std::invalid_argument("FunctionalSet: row size must equal basis pairs");
    for (int p = 0; p < basis->pairs(); ++p)
      if (row[p] != 0.0)
        for (size_t m = 0; m < basis->tensor.size(); ++m)
          if (basis->coeff[p][m] != 0.0)
            max_deg = std::max(max_deg, total_degree(basis->tensor[m], ou_.d));
  }
  max_degree_ = max_deg;
  const auto full = basis->tensor;
  for (size_t m = 0; m < full.size(); ++m)
    if (total_degree(full[m], ou_.d) <= max_deg) tensor_.push_back(full[m]);
  if (tensor_.size() > 256 || max_degree_ > 63)
    throw std::invalid_argument("FunctionalSet: functional degree too large for hot path");

  // convert pair rows to tensor rows
  for (const auto& row : pair_rows) {
    std::vector<double> trow(tensor_.size(), 0.0);
    for (int p = 0; p < basis->pairs(); ++p) {
      if (row[p] == 0.0) continue;
      size_t ti = 0;
      for (size_t m = 0; m < full.size(); ++m) {
        if (total_degree(full[m], ou_.d) > max_deg) continue;
        trow[ti] += row[p] * basis->coeff[p][m];
        ++ti;
      }
    }
    tensor_rows_.push_back(std::move(trow));
  }
}

std::vector<double> FunctionalSet::row_of_pair(const BasisPtr& basis, int level, int j) {
  if (level < 0 || level >= basis->levels() || j < 0 || j >= basis->mult[level])
    throw std::invalid_argument("FunctionalSet: (k, j) outside basis");
  std::vector<double> row(basis->pairs(), 0.0);
  row[basis->pair_index(level, j)] = 1.0;
  return row;
}

void FunctionalSet::accumulate(const double* x, double* acc) const {
  double table[kMaxDim][64];
  const double s = ou_.stationary_sd();
  for (int c = 0; c < ou_.d; ++c)
    hermite_orthonormal(x[c] / s, max_degree_, std::span<double>(table[c], max_degree_ + 1));
  double tv[256];
  const size_t m = tensor_.size();
  for (size_t i = 0; i < m; ++i) {
    double v = 1.0;
    for (int c = 0; c < ou_.d; ++c) v *= table[c][tensor_[i][c]];
    tv[i] = v;
  }
  for (size_t r = 0; r < tensor_rows_.size(); ++r) {
    const double* row = tensor_rows_[r].data();
    double dotv = 0.0;
    for (size_t i = 0; i < m; ++i) dotv += row[i] * tv[i];
    acc[r] += dotv;
  }
}

StreamStats run_functionals(const ModelSpec& model, const Configuration& init,
                            const SimConfig& cfg, const FunctionalSet& funcs, Rng& rng) {
  if (init.dim != model.ou.d)
    throw std::invalid_argument("run_functionals: dimension mismatch");
  cfg.validate(model);

  StreamStats st;
  st.snapshot_times = cfg.snapshot_times;
  st.sums.assign(cfg.snapshot_times.size(), std::vector<double>(funcs.rows(), 0.0));
  if (init.count() == 0) return st;

  const double bound = cfg.thinning_bound > 0 ? cfg.thinning_bound : model.mech.beta_sup;
  AccumulatorSink sink{&funcs, &st.sums};
  const bool ok = dfs_engine(model, init, cfg.snapshot_times, bound, cfg.pop_cap,
                             cfg.effective_event_budget(), rng, sink, st.counts,
                             st.event_count);
  st.capped = !ok;
  return st;
}

double functional(const Configuration& config,
                  const std::function<double(const double*)>& f) {
  double acc = 0.0;
  for (size_t i = 0; i < config.count(); ++i) {
    const double v = f(config.at(i));
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "functional: non-finite value at particle (";
      for (int c = 0; c < config.dim; ++c) os << (c ? "," : "") << config.at(i)[c];
      os << ")";
      throw std::runtime_error(os.str());
    }
    acc += v;
  }
  return acc;
}

double martingale_W(const Configuration& config, const ModelSpec& model) {
  const auto& basis = *model.basis;
  double acc = 0.0;
  for (size_t i = 0; i < config.count(); ++i) acc += basis.eval_pair(0, config.at(i));
  return std::exp(model.lambda1 * config.t) * acc;
}

double martingale_H(const Configuration& config, const ModelSpec& model, int level, int j) {
  const auto& basis = *model.basis;
  if (level < 0 || level >= basis.levels() || j < 0 || j >= basis.mult[level])
    throw std::invalid_argument("martingale_H: (k, j) outside basis");
  const int p = basis.pair_index(level, j);
  double acc = 0.0;
  for (size_t i = 0; i < config.count(); ++i) acc += basis.eval_pair(p, config.at(i));
  return std::exp(basis.lambda[level] * config.t) * acc;
}

std::optional<bool> survival_indicator(const Trajectory& traj, const ModelSpec& model,
                                       double threshold) {
  if (traj.capped) return std::nullopt;
  if (traj.snapshots.empty()) return false;
  const Configuration& last = traj.snapshots.back();
  if (last.count() == 0) return false;
  return martingale_W(last, model) >= threshold;
}

void for_each_replicate(uint64_t n_replicates, int threads,
                        const std::function<void(uint64_t)>& body) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, threads);
  if (threads == 1 || n_replicates <= 1) {
    for (uint64_t r = 0; r < n_replicates; ++r) body(r);
    return;
  }
  std::atomic<uint64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const uint64_t r = next.fetch_add(1);
      if (r >= n_replicates) return;
      try {
        body(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace bcl
