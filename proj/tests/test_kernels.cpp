#include <doctest.h>

#include <cmath>
#include <memory>

#include "stmc/kernels.hpp"
#include "test_support.hpp"

using namespace stmc;

namespace {

std::shared_ptr<const BlockPrior> gaussian_prior(int dim, double sd = 1.0) {
  auto layout = std::make_shared<BlockLayout>();
  layout->add_block("theta", static_cast<std::size_t>(dim));
  std::vector<Marginal> m;
  append_block(m, static_cast<std::size_t>(dim), GaussianMarginal{0.0, sd});
  return std::make_shared<BlockPrior>(layout, std::move(m));
}

std::shared_ptr<const BlockPrior> unit_square_prior(int dim = 2) {
  auto layout = std::make_shared<BlockLayout>();
  layout->add_block("theta", static_cast<std::size_t>(dim));
  std::vector<Marginal> m;
  append_block(m, static_cast<std::size_t>(dim), UniformMarginal{0.0, 1.0});
  return std::make_shared<BlockPrior>(layout, std::move(m));
}

ProposalSpec iso_proposal(int dim, double sd, bool diagonal) {
  if (diagonal)
    return make_diagonal_proposal(Eigen::VectorXd::Constant(dim, sd * sd), 1.0);
  return make_full_proposal((sd * sd) * Eigen::MatrixXd::Identity(dim, dim), 1.0);
}

}  // namespace

TEST_CASE("equal-density candidates are always accepted") {
  const auto target = exponent_target(unit_square_prior(), nullptr, 0.0);
  ChainState state = make_chain_state(Eigen::VectorXd::Constant(2, 0.5), target);
  RngStream rng(3);
  const ProposalSpec prop = iso_proposal(2, 0.01, false);
  for (int i = 0; i < 200; ++i) rwm_step(state, target, prop, rng);
  CHECK(state.stage2_accepts == state.steps);  // flat target, ratio is one everywhere
}

TEST_CASE("a candidate outside the failure domain is always rejected, state untouched") {
  // First evaluation (the chain start) lies inside the domain; every
  // candidate afterwards falls outside it.
  auto fail = std::make_shared<FailureFn>();
  auto calls = std::make_shared<std::atomic<int>>(0);
  fail->fn = [calls](const Eigen::VectorXd&) {
    return calls->fetch_add(1) == 0 ? 5.0 : 0.0;
  };
  const auto target = indicator_target(gaussian_prior(3), fail, 1.0);
  ChainState state = make_chain_state(Eigen::VectorXd::Zero(3), target);
  const ChainState before = state;
  RngStream rng(11);

  for (KernelKind k : {KernelKind::Rwm, KernelKind::Mma, KernelKind::Romma}) {
    const ProposalSpec prop = iso_proposal(3, 0.3, k == KernelKind::Mma);
    for (int i = 0; i < 30; ++i) kernel_step(k, state, target, prop, rng);
    CHECK(state.theta == before.theta);
    CHECK(state.log_prior == before.log_prior);
    CHECK(state.failure_value == before.failure_value);
    CHECK(state.log_like == before.log_like);
  }
  // RWM can never accept; MMA/ROMMA may count identity candidates as
  // stage-2 accepts but the statistical state is bit-identical regardless.
}

TEST_CASE("MMA demands a diagonal proposal") {
  const auto target = exponent_target(unit_square_prior(), nullptr, 0.0);
  ChainState state = make_chain_state(Eigen::VectorXd::Constant(2, 0.5), target);
  RngStream rng(1);
  const ProposalSpec full = iso_proposal(2, 0.1, false);
  CHECK_THROWS_AS(mma_step(state, target, full, rng), std::invalid_argument);
}

TEST_CASE("MMA identity candidate repeats the chain, counts as accept, costs nothing") {
  auto like = std::make_shared<LogLikelihood>();
  auto counter = like->evals;
  like->fn = [counter](const Eigen::VectorXd&) {
    counter->fetch_add(1);
    return -1.0;
  };
  const auto target = exponent_target(unit_square_prior(), like, 1.0);
  ChainState state = make_chain_state(Eigen::VectorXd::Constant(2, 0.5), target);
  const std::uint64_t evals_at_start = like->eval_count();

  // A gigantic step lands outside [0,1] for every component, so stage 1
  // rejects everything and the candidate equals the current point.
  const ProposalSpec prop = iso_proposal(2, 1e9, true);
  RngStream rng(8);
  for (int i = 0; i < 100; ++i) mma_step(state, target, prop, rng);
  CHECK(state.stage2_accepts == state.steps);
  CHECK(state.theta == Eigen::VectorXd::Constant(2, 0.5));
  CHECK(like->eval_count() == evals_at_start);
}

TEST_CASE("kernels preserve an exactly-sampleable product target (stationarity surrogate)") {
  // Uniform x Gaussian product prior at beta 0. 10^4 independent chains take
  // five steps; endpoint moments must stay within 4 standard errors.
  auto layout = std::make_shared<BlockLayout>();
  layout->add_block("u", 1);
  layout->add_block("g", 1);
  std::vector<Marginal> marginals{UniformMarginal{0.0, 1.0}, GaussianMarginal{0.0, 1.0}};
  auto prior = std::make_shared<BlockPrior>(layout, std::move(marginals));
  const auto target = exponent_target(prior, nullptr, 0.0);

  const int n_chains = 10000;
  const int n_steps = 5;
  for (KernelKind k : {KernelKind::Rwm, KernelKind::Mma, KernelKind::Romma}) {
    CAPTURE(kernel_name(k));
    const ProposalSpec prop = iso_proposal(2, 0.4, k == KernelKind::Mma);
    double sum_u = 0.0, sum_uu = 0.0, sum_g = 0.0, sum_gg = 0.0;
    for (int c = 0; c < n_chains; ++c) {
      RngStream rng = chain_stream(1000 + static_cast<int>(k), 1, c);
      Eigen::VectorXd start(2);
      start << rng.uniform(), rng.normal();
      ChainState state = make_chain_state(start, target);
      for (int s = 0; s < n_steps; ++s) kernel_step(k, state, target, prop, rng);
      sum_u += state.theta[0];
      sum_uu += state.theta[0] * state.theta[0];
      sum_g += state.theta[1];
      sum_gg += state.theta[1] * state.theta[1];
    }
    const double n = n_chains;
    // Uniform[0,1]: mean 1/2 (sd .2887), second moment 1/3 (sd of u^2 = .2981)
    CHECK(std::abs(sum_u / n - 0.5) < 4.0 * 0.2887 / std::sqrt(n));
    CHECK(std::abs(sum_uu / n - 1.0 / 3.0) < 4.0 * 0.2981 / std::sqrt(n));
    // N(0,1): mean 0 (sd 1), second moment 1 (sd of g^2 = sqrt(2))
    CHECK(std::abs(sum_g / n - 0.0) < 4.0 * 1.0 / std::sqrt(n));
    CHECK(std::abs(sum_gg / n - 1.0) < 4.0 * std::sqrt(2.0) / std::sqrt(n));
  }
}

TEST_CASE("each ROMMA ordering alone preserves a constant-likelihood target") {
  auto prior = unit_square_prior(3);
  const auto target = exponent_target(prior, nullptr, 0.0);
  Eigen::MatrixXd sigma(3, 3);
  sigma << 0.04, 0.01, 0.0,
           0.01, 0.09, -0.02,
           0.0, -0.02, 0.05;
  const ProposalSpec prop = make_full_proposal(sigma, 1.0);

  for (bool forward : {true, false}) {
    CAPTURE(forward);
    const int n_chains = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int c = 0; c < n_chains; ++c) {
      RngStream rng = chain_stream(forward ? 21 : 22, 2, c);
      Eigen::VectorXd start(3);
      start << rng.uniform(), rng.uniform(), rng.uniform();
      ChainState state = make_chain_state(start, target);
      for (int s = 0; s < 6; ++s) romma_step_ordered(state, target, prop, rng, forward);
      sum += state.theta[1];
      sum_sq += state.theta[1] * state.theta[1];
    }
    const double n = n_chains;
    CHECK(std::abs(sum / n - 0.5) < 4.0 * 0.2887 / std::sqrt(n));
    CHECK(std::abs(sum_sq / n - 1.0 / 3.0) < 4.0 * 0.2981 / std::sqrt(n));
  }
}

TEST_CASE("ROMMA matches MMA component acceptance for diagonal proposals") {
  // With a diagonal root and an independent prior, each rank-one update is a
  // single-component move, so the stage-1 marginal accept probabilities of
  // the two kernels coincide.
  auto prior = gaussian_prior(2, 1.0);
  const auto target = exponent_target(prior, nullptr, 0.0);
  const ProposalSpec diag = iso_proposal(2, 1.7, true);
  const ProposalSpec full = iso_proposal(2, 1.7, false);

  const int n_steps = 200000;
  ChainState mma = make_chain_state(Eigen::VectorXd::Zero(2), target);
  ChainState romma = make_chain_state(Eigen::VectorXd::Zero(2), target);
  RngStream rng_a(501), rng_b(502);
  for (int i = 0; i < n_steps; ++i) {
    mma_step(mma, target, diag, rng_a);
    romma_step(romma, target, full, rng_b);
  }
  for (int j = 0; j < 2; ++j) {
    const double rate_mma = static_cast<double>(mma.stage1_accepts[j]) / n_steps;
    const double rate_romma = static_cast<double>(romma.stage1_accepts[j]) / n_steps;
    CHECK(std::abs(rate_mma - rate_romma) < 0.02);
  }
}

TEST_CASE("one model evaluation per step, independent of dimension") {
  const int dim = 8;
  auto prior = gaussian_prior(dim, 2.0);
  auto like = std::make_shared<LogLikelihood>();
  auto counter = like->evals;
  like->fn = [counter](const Eigen::VectorXd& t) {
    counter->fetch_add(1);
    return -0.5 * t.squaredNorm();
  };
  const auto target = exponent_target(prior, like, 1.0);

  for (KernelKind k : {KernelKind::Rwm, KernelKind::Mma, KernelKind::Romma}) {
    CAPTURE(kernel_name(k));
    ChainState state = make_chain_state(Eigen::VectorXd::Zero(dim), target);
    const ProposalSpec prop = iso_proposal(dim, 0.5, k == KernelKind::Mma);
    RngStream rng(611 + static_cast<int>(k));
    const std::uint64_t before = like->eval_count();
    const int n_steps = 2000;
    for (int i = 0; i < n_steps; ++i) kernel_step(k, state, target, prop, rng);
    const std::uint64_t used = like->eval_count() - before;
    CHECK(used <= static_cast<std::uint64_t>(n_steps));
    if (k == KernelKind::Rwm) {
      CHECK(used == static_cast<std::uint64_t>(n_steps));  // unbounded prior: no short-circuit
    } else {
      CHECK(used > static_cast<std::uint64_t>(n_steps) / 2);  // identity candidates are rare
    }
  }
}

TEST_CASE("long RWM chain reproduces 2-D standard normal moments") {
  auto prior = gaussian_prior(2, 1.0);
  const auto target = exponent_target(prior, nullptr, 0.0);
  const ProposalSpec prop = iso_proposal(2, 1.2, false);
  ChainState state = make_chain_state(Eigen::VectorXd::Zero(2), target);
  RngStream rng(4242);

  const int n_steps = 400000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n_steps; ++i) {
    rwm_step(state, target, prop, rng);
    mean += state.theta;
    second += state.theta * state.theta.transpose();
  }
  mean /= n_steps;
  second /= n_steps;
  // Effective sample size is well above 10^4 at this scale; 3 standard
  // errors with a conservative ESS of 10^4 gives 0.03.
  CHECK(std::abs(mean[0]) < 0.03);
  CHECK(std::abs(mean[1]) < 0.03);
  CHECK(std::abs(second(0, 0) - 1.0) < 0.1);
  CHECK(std::abs(second(1, 1) - 1.0) < 0.1);
  CHECK(std::abs(second(0, 1)) < 0.1);
}
