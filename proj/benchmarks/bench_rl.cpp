#include <benchmark/benchmark.h>

#include <random>

#include "voltstab/ddpg.hpp"
#include "voltstab/grid.hpp"
#include "voltstab/mlp.hpp"

using namespace voltstab;

// critic shape: (v, u) of the five-bus feeder -> 100 -> 100 -> 1
static void BM_CriticForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const FeedForwardNet net = FeedForwardNet::random({8, 100, 100, 1}, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CriticForward)->Arg(1)->Arg(256);

static void BM_CriticBackward(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const FeedForwardNet net = FeedForwardNet::random({8, 100, 100, 1}, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, state.range(0));
  FeedForwardNet::Tape tape;
  net.forward(x, tape);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Ones(1, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(net.backward(tape, up));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CriticBackward)->Arg(1)->Arg(256);

static void BM_TrainEpisode(benchmark::State& state) {
  const RadialNetwork net = five_bus_feeder();
  TrainConfig cfg = TrainConfig::benchmark_preset();
  cfg.scope = state.range(0) == 0 ? AgentScope::Joint : AgentScope::PerBus;
  DdpgTrainer trainer(build_sensitivity(net).X, net.band(), cfg);
  // fill the buffer so every timed episode includes its updates
  while (trainer.buffer().size() < cfg.batch) trainer.run_episode();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_episode());
  state.SetLabel(to_string(cfg.scope));
}
BENCHMARK(BM_TrainEpisode)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
