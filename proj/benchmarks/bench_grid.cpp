#include <benchmark/benchmark.h>

#include "voltstab/dynamics.hpp"
#include "voltstab/grid.hpp"
#include "voltstab/linalg.hpp"

using namespace voltstab;

static void BM_BuildSensitivity(benchmark::State& state) {
  const RadialNetwork net = generate_random_feeder(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(build_sensitivity(net));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BuildSensitivity)->RangeMultiplier(2)->Range(4, 64)->Complexity();

static void BM_MinEigenvalue(benchmark::State& state) {
  const Eigen::MatrixXd X = build_sensitivity(generate_random_feeder(static_cast<std::size_t>(state.range(0)), 1)).X;
  for (auto _ : state) benchmark::DoNotOptimize(linalg::min_eigenvalue(X));
}
BENCHMARK(BM_MinEigenvalue)->Arg(5)->Arg(56);

static void BM_Distflow(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const RadialNetwork net = generate_random_feeder(n, 2);
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(solve_distflow(net, p, p));
}
BENCHMARK(BM_Distflow)->Arg(5)->Arg(56);

static void BM_RolloutLinear(benchmark::State& state) {
  const RadialNetwork net = five_bus_feeder();
  const Eigen::MatrixXd X = build_sensitivity(net).X;
  const LinearDeadbandPolicy policy(net.band());
  Eigen::VectorXd env(4);
  env << 1.08, 1.0, 0.92, 1.01;
  const SimulationConfig sim;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout(policy, X, net.band(), env, Eigen::VectorXd::Zero(4), sim, {}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(sim.horizon));
}
BENCHMARK(BM_RolloutLinear);
