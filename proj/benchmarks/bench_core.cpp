#include <benchmark/benchmark.h>

#include "bcl/moments.hpp"
#include "bcl/particle.hpp"
#include "bcl/rng.hpp"
#include "bcl/spectral.hpp"

namespace {

bcl::ModelSpec yule_model(double beta) {
  bcl::ModelSpecOptions opts;
  opts.k_max = 6;
  return bcl::ModelSpec::build(bcl::OUParams{1.0, 1.0, 1},
                               bcl::constant_mechanism(beta, {0, 0, 1.0}), opts);
}

void BM_RngNormal(benchmark::State& state) {
  bcl::Rng rng(42);
  double acc = 0;
  for (auto _ : state) acc += rng.next_normal();
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_RngNormal);

void BM_RngExponential(benchmark::State& state) {
  bcl::Rng rng(42);
  double acc = 0;
  for (auto _ : state) acc += rng.next_exponential();
  benchmark::DoNotOptimize(acc);
}
BENCHMARK(BM_RngExponential);

void BM_OuTransition(benchmark::State& state) {
  bcl::Rng rng(42);
  const bcl::OUParams ou{1.0, 1.0, 1};
  double x = 0.3, out = 0;
  for (auto _ : state) {
    bcl::ou_transition(&x, 0.37, ou, rng, &out);
    x = out;
  }
  benchmark::DoNotOptimize(x);
}
BENCHMARK(BM_OuTransition);

/// Whole-tree throughput: events/second for a Yule tree run to the horizon.
void BM_YuleTree(benchmark::State& state) {
  const auto model = yule_model(2.0);
  const double t = static_cast<double>(state.range(0));
  const auto f = bcl::split(bcl::expansion_from_pairs(model.basis, {{1, 0, 1.0}}));
  const bcl::FunctionalSet funcs(model.basis,
                                 {bcl::FunctionalSet::row_of(f),
                                  bcl::FunctionalSet::row_of_pair(model.basis, 0, 0)});
  bcl::SimConfig sim;
  sim.horizon = t;
  sim.snapshot_times = {t};
  sim.pop_cap = 1u << 30;
  sim.event_budget = 1ull << 40;
  bcl::Configuration init;
  init.dim = 1;
  init.coords = {0.0};
  uint64_t rep = 0, events = 0;
  for (auto _ : state) {
    bcl::Rng rng = bcl::Rng::stream(7, rep++);
    const auto st = bcl::run_functionals(model, init, sim, funcs, rng);
    events += st.event_count;
    benchmark::DoNotOptimize(st.sums[0][0]);
  }
  state.counters["events/s"] =
      benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_YuleTree)->Arg(4)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_GaussHermite128(benchmark::State& state) {
  for (auto _ : state) {
    auto rule = bcl::GaussHermiteRule::make(128);
    benchmark::DoNotOptimize(rule.nodes[0]);
  }
}
BENCHMARK(BM_GaussHermite128)->Unit(benchmark::kMillisecond);

void BM_GalerkinSpectrum(benchmark::State& state) {
  const bcl::OUParams ou{1.0, 1.0, 1};
  auto alpha = [](const double* x) { return std::exp(-x[0] * x[0]); };
  for (auto _ : state) {
    auto basis = bcl::galerkin_spectrum(ou, alpha, 40, 5);
    benchmark::DoNotOptimize(basis->lambda[0]);
  }
}
BENCHMARK(BM_GalerkinSpectrum)->Unit(benchmark::kMillisecond);

void BM_SecondMoment(benchmark::State& state) {
  const auto model = yule_model(2.0);
  const auto f = bcl::split(bcl::expansion_from_pairs(model.basis, {{0, 0, 1.0}}));
  const double x = 0.0;
  for (auto _ : state) {
    auto rep = bcl::second_moment(model, f, 1.0, &x);
    benchmark::DoNotOptimize(rep.second_moment);
  }
}
BENCHMARK(BM_SecondMoment)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
