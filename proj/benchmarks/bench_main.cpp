#include <benchmark/benchmark.h>

#include "gwbayes/flow.hpp"
#include "gwbayes/inversion.hpp"
#include "gwbayes/laplace.hpp"
#include "gwbayes/scenario_io.hpp"
#include "gwbayes/tracking.hpp"
#include "gwbayes/uq.hpp"

using namespace gwbayes;

namespace {

const Scenario& valley() {
  static const Scenario s = load_scenario(std::string(GWBAYES_DATA_DIR) + "/valley_small.json");
  return s;
}

SolverOptions mode(benchmark::State& state) {
  SolverOptions o;
  o.mode = state.range(0) == 0 ? SolverMode::confined_linear : SolverMode::unconfined_picard;
  return o;
}

void BM_SolveSteadyHeads(benchmark::State& state) {
  const auto opts = mode(state);
  const auto p = ParameterVector::base_case();
  for (auto _ : state) benchmark::DoNotOptimize(solve_steady_heads(valley(), p, opts));
}
BENCHMARK(BM_SolveSteadyHeads)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrackAllTopCells(benchmark::State& state) {
  const auto p = ParameterVector::base_case();
  SolverOptions o;
  o.mode = SolverMode::confined_linear;
  const HeadField hf = solve_steady_heads(valley(), p, o);
  const VelocityField vf = build_velocity_field(hf, valley(), p);
  const auto starts = release_grid(vf, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(travel_time_distribution(vf, starts));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * starts.size()));
}
BENCHMARK(BM_TrackAllTopCells)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_NllEvaluation(benchmark::State& state) {
  SolverOptions o;
  o.mode = SolverMode::confined_linear;
  const auto obs = generate_synthetic_heads(valley(), ParameterVector::base_case(), 1.0, 3, 1, o).front();
  ParameterVector p = ParameterVector::base_case();
  for (auto _ : state) {
    // Fresh parameters each time so the memo cache never hits.
    p.r_irrig *= 1.0 + 1e-9;
    benchmark::DoNotOptimize(nll_joint(p, obs, 1.0, valley(), o));
  }
}
BENCHMARK(BM_NllEvaluation)->Unit(benchmark::kMillisecond);

void BM_SamplePosterior(benchmark::State& state) {
  PosteriorGaussian pg;
  pg.mu = ParameterVector::base_case();
  pg.sigma = Eigen::Vector4d(std::pow(1e-5, 2), std::pow(5e-5, 2), std::pow(5e-4, 2), std::pow(2e-9, 2)).asDiagonal();
  for (auto _ : state) benchmark::DoNotOptimize(sample_posterior(pg, static_cast<std::size_t>(state.range(0)), 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SamplePosterior)->Arg(500)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
