#include <benchmark/benchmark.h>

#include "stmc/hydro/network_io.hpp"
#include "stmc/rng.hpp"

namespace {

using namespace stmc;
using namespace stmc::hydro;

const NetworkSpec& hanoi() {
  static const NetworkSpec net = load_network(std::string(STMC_DATA_DIR) + "/hanoi.json");
  return net;
}

Eigen::VectorXd prior_theta(const NetworkSpec& net, RngStream& rng) {
  Eigen::VectorXd theta(net.n_demand_nodes() + 2 * net.n_pipes());
  for (Eigen::Index i = 0; i < net.n_demand_nodes(); ++i) theta[i] = 0.75 + 0.15 * rng.normal();
  for (Eigen::Index k = 0; k < net.n_pipes(); ++k) {
    theta[net.n_demand_nodes() + k] = rng.exponential(0.002);
    theta[net.n_demand_nodes() + net.n_pipes() + k] = rng.uniform();
  }
  return theta;
}

void BM_HanoiSolveLeakFree(benchmark::State& bench) {
  const auto& net = hanoi();
  const Eigen::VectorXd demand = 0.75 * net.reference_demand_m3h() / 3600.0;
  const LeakConfig leaks = LeakConfig::none(net.n_pipes());
  for (auto _ : bench) {
    benchmark::DoNotOptimize(solve_network(net, demand, leaks).node_head.data());
  }
}
BENCHMARK(BM_HanoiSolveLeakFree);

void BM_HanoiSolveWithLeaks(benchmark::State& bench) {
  const auto& net = hanoi();
  RngStream rng(11);
  const DecodedTheta dec = decode_theta(net, prior_theta(net, rng));
  for (auto _ : bench) {
    benchmark::DoNotOptimize(solve_network(net, dec.demand_m3s, dec.leaks).node_head.data());
  }
}
BENCHMARK(BM_HanoiSolveWithLeaks);

void BM_HanoiFailureValue(benchmark::State& bench) {
  const auto& net = hanoi();
  RngStream rng(12);
  const Eigen::VectorXd theta = prior_theta(net, rng);
  for (auto _ : bench) {
    benchmark::DoNotOptimize(failure_value(net, theta));
  }
}
BENCHMARK(BM_HanoiFailureValue);

}  // namespace

BENCHMARK_MAIN();
