#include "qnet/background.hpp"
#include "qnet/fclt.hpp"
#include "qnet/moments.hpp"
#include "qnet/networks.hpp"
#include "qnet/oracle.hpp"
#include "qnet/perf.hpp"
#include "qnet/sim.hpp"

#include <benchmark/benchmark.h>

namespace {

qnet::ValidatedNetwork complete(std::size_t n) {
  return qnet::validate(qnet::networks::symmetric_complete(n, 2.0, 1.0, 1.0, 1.0, 1.0, 0.5));
}

void BM_StationaryMoments(benchmark::State& state) {
  const auto net = complete(static_cast<std::size_t>(state.range(0)));
  const auto chain = qnet::BackgroundChain::from_network(net);
  const auto order = static_cast<unsigned>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(qnet::stationary_factorial_moments(net, chain, order));
}
BENCHMARK(BM_StationaryMoments)->Args({3, 2})->Args({3, 4})->Args({6, 3})->Unit(benchmark::kMillisecond);

void BM_TransientMoments(benchmark::State& state) {
  const auto net = complete(static_cast<std::size_t>(state.range(0)));
  const auto chain = qnet::BackgroundChain::from_network(net);
  const auto init = qnet::InitialCondition::empty(net.node_count());
  for (auto _ : state) {
    benchmark::DoNotOptimize(qnet::transient_factorial_moments(net, chain, 2, 1.0, init, true));
  }
}
BENCHMARK(BM_TransientMoments)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_LossMetrics(benchmark::State& state) {
  const auto net = complete(static_cast<std::size_t>(state.range(0)));
  const auto chain = qnet::BackgroundChain::from_network(net);
  for (auto _ : state) benchmark::DoNotOptimize(qnet::loss_metrics(net, chain));
}
BENCHMARK(BM_LossMetrics)->Arg(4)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_FcltCovariance(benchmark::State& state) {
  const auto net = complete(4);
  const auto chain = qnet::BackgroundChain::from_network(net);
  for (auto _ : state) benchmark::DoNotOptimize(qnet::fclt_covariance(net, chain, 2.0, qnet::Regime::EQ1));
}
BENCHMARK(BM_FcltCovariance)->Unit(benchmark::kMillisecond);

void BM_OracleStationary(benchmark::State& state) {
  const auto net = qnet::validate(qnet::networks::tandem(1.0, 1.0, 1.0, 1.0, 1.0, 0.0));
  const auto chain = qnet::BackgroundChain::from_network(net);
  const auto cap = static_cast<unsigned>(state.range(0));
  const qnet::TruncatedChain tc(net, chain, {cap, cap});
  for (auto _ : state) benchmark::DoNotOptimize(qnet::oracle_stationary(tc));
}
BENCHMARK(BM_OracleStationary)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_SimulateReplication(benchmark::State& state) {
  const auto net = complete(4);
  qnet::SimConfig config;
  config.horizon = 10.0;
  config.grid = 1.0;
  config.n_scale = static_cast<double>(state.range(0));
  config.init = qnet::InitialCondition::empty(net.node_count());
  std::size_t rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(qnet::run_one(net, config, rep++));
}
BENCHMARK(BM_SimulateReplication)->Arg(1)->Arg(100)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
