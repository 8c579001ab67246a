#include <benchmark/benchmark.h>

#include <random>

#include "voltstab/grid.hpp"
#include "voltstab/lyapunov.hpp"
#include "voltstab/monotone_check.hpp"
#include "voltstab/stacked_relu.hpp"

using namespace voltstab;

static void BM_PolicyEval(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const StackedReluParams p =
      constrain_bus(random_raw(1, static_cast<std::size_t>(state.range(0)), rng), 0, 0.95, 1.05);
  double v = 0.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy_eval(p, v));
    v = v > 1.1 ? 0.9 : v + 1e-4;
  }
}
BENCHMARK(BM_PolicyEval)->Arg(16)->Arg(100);

static void BM_Constrain(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const VoltageBand band = VoltageBand::uniform(4);
  const RawPolicyParams raw = random_raw(4, 16, rng);
  for (auto _ : state) benchmark::DoNotOptimize(constrain(raw, band));
}
BENCHMARK(BM_Constrain);

static void BM_ParamGrad(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const VoltageBand band = VoltageBand::uniform(4);
  const RawPolicyParams raw = random_raw(4, 16, rng);
  for (auto _ : state) benchmark::DoNotOptimize(policy_param_grad(raw, band, 2, 1.08));
}
BENCHMARK(BM_ParamGrad);

static void BM_VerifyMonotone(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const VoltageBand band = five_bus_feeder().band();
  const StackedReluPolicy policy(constrain(random_raw(4, 16, rng), band));
  for (auto _ : state) benchmark::DoNotOptimize(verify_monotone(policy, band));
}
BENCHMARK(BM_VerifyMonotone)->Unit(benchmark::kMillisecond);

static void BM_Certify(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const RadialNetwork net = five_bus_feeder();
  const Eigen::MatrixXd X = build_sensitivity(net).X;
  const StackedReluPolicy policy(constrain(random_raw(4, 16, rng, 16.0, 24.0), net.band()));
  for (auto _ : state) benchmark::DoNotOptimize(certify_policy(X, policy, net.band()));
}
BENCHMARK(BM_Certify)->Unit(benchmark::kMillisecond);
