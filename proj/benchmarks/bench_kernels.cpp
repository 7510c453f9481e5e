#include <benchmark/benchmark.h>

#include "stmc/kernels.hpp"

namespace {

using namespace stmc;

struct KernelFixture {
  std::shared_ptr<const BlockPrior> prior;
  TemperedTarget target;
  ProposalSpec full;
  ProposalSpec diag;
  ChainState state;
  RngStream rng{42};

  explicit KernelFixture(int dim) {
    auto layout = std::make_shared<BlockLayout>();
    layout->add_block("demand", static_cast<std::size_t>(dim) / 3 + 1);
    layout->add_block("leak_size", static_cast<std::size_t>(dim) / 3);
    layout->add_block("leak_pos",
                      static_cast<std::size_t>(dim) - layout->dim());
    std::vector<Marginal> m;
    append_block(m, layout->block("demand").length, GaussianMarginal{0.75, 0.15});
    append_block(m, layout->block("leak_size").length, ExponentialMarginal{0.002});
    append_block(m, layout->block("leak_pos").length, UniformMarginal{0.0, 1.0});
    prior = std::make_shared<BlockPrior>(layout, std::move(m));

    auto like = std::make_shared<LogLikelihood>();
    like->fn = [](const Eigen::VectorXd& t) { return -0.5 * t.squaredNorm(); };
    target = exponent_target(prior, like, 1.0);

    RngStream init(7);
    const Eigen::VectorXd theta = prior->sample(init);
    Eigen::MatrixXd sigma = 0.01 * Eigen::MatrixXd::Identity(dim, dim);
    for (int i = 0; i + 1 < dim; ++i) sigma(i, i + 1) = sigma(i + 1, i) = 0.002;
    full = make_full_proposal(sigma, 0.4);
    diag = make_diagonal_proposal(sigma.diagonal(), 0.4);
    state = make_chain_state(theta, target);
  }
};

void BM_RwmStep(benchmark::State& bench) {
  KernelFixture f(static_cast<int>(bench.range(0)));
  for (auto _ : bench) {
    rwm_step(f.state, f.target, f.full, f.rng);
    benchmark::DoNotOptimize(f.state.theta.data());
  }
}
BENCHMARK(BM_RwmStep)->Arg(9)->Arg(33)->Arg(99);

void BM_MmaStep(benchmark::State& bench) {
  KernelFixture f(static_cast<int>(bench.range(0)));
  for (auto _ : bench) {
    mma_step(f.state, f.target, f.diag, f.rng);
    benchmark::DoNotOptimize(f.state.theta.data());
  }
}
BENCHMARK(BM_MmaStep)->Arg(9)->Arg(33)->Arg(99);

void BM_RommaStep(benchmark::State& bench) {
  KernelFixture f(static_cast<int>(bench.range(0)));
  for (auto _ : bench) {
    romma_step(f.state, f.target, f.full, f.rng);
    benchmark::DoNotOptimize(f.state.theta.data());
  }
}
BENCHMARK(BM_RommaStep)->Arg(9)->Arg(33)->Arg(99);

void BM_MatrixSqrt(benchmark::State& bench) {
  const int dim = static_cast<int>(bench.range(0));
  RngStream rng(5);
  Eigen::MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  const Eigen::MatrixXd sigma = g * g.transpose();
  for (auto _ : bench) {
    benchmark::DoNotOptimize(matrix_sqrt(sigma).data());
  }
}
BENCHMARK(BM_MatrixSqrt)->Arg(33)->Arg(99);

}  // namespace

BENCHMARK_MAIN();
