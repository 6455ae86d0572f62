// Serial reference vs OpenMP path for each parallel kernel. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "anchorplace/optimizer.hpp"
#include "anchorplace/pcrb.hpp"
#include "anchorplace/simulate.hpp"

using namespace anchorplace;

namespace {

const Scenario& paper() {
  static const Scenario s = load_scenario(std::string(ANCHORPLACE_DATA_DIR) + "/paper_scenario.json");
  return s;
}

const std::vector<Vec2> kXy{{42.0, 16.0}, {38.0, 20.0}, {5.0, 3.0}, {20.0, 30.0}};

Execution exec(const benchmark::State& st) { return st.range(0) ? Execution::parallel : Execution::serial; }

void BM_PriorMc(benchmark::State& st) {
  const TargetPrior pair{{{0, 0, 0}, {1, 0, 0}}, {0.5, 0.5}, 0.25};
  for (auto _ : st) benchmark::DoNotOptimize(prior_fim(pair, MonteCarloPrior{200000, 1, exec(st)}));
}

void BM_FimMc(benchmark::State& st) {
  const Placement pl = Placement::build(paper(), kXy);
  FimMcOptions o;
  o.n_trials = 5000;
  o.exec = exec(st);
  for (auto _ : st) benchmark::DoNotOptimize(estimate_fim_mc(paper(), pl, {40, 18, 10}, o));
}

void BM_MseTrials(benchmark::State& st) {
  const Placement pl = Placement::build(paper(), kXy);
  MseOptions o;
  o.n_trials = 2000;
  o.exec = exec(st);
  for (auto _ : st) benchmark::DoNotOptimize(mse_trials(paper(), pl, 1e-4, o));
}

void BM_MultiStart(benchmark::State& st) {
  const ProblemData p = ProblemData::from(paper());
  MultiStartOptions o;
  o.starts = 4;
  o.run.max_iters = 30;
  o.exec = exec(st);
  for (auto _ : st) benchmark::DoNotOptimize(optimize(paper(), p, o));
}

}  // namespace

BENCHMARK(BM_PriorMc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FimMc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MseTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MultiStart)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
