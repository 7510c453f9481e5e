#include <doctest.h>

#include <cmath>

#include "stmc/engine.hpp"
#include "test_support.hpp"

using namespace stmc;

namespace {

std::shared_ptr<const BlockPrior> std_normal_prior(int dim) {
  auto layout = std::make_shared<BlockLayout>();
  layout->add_block("theta", static_cast<std::size_t>(dim));
  std::vector<Marginal> m;
  append_block(m, static_cast<std::size_t>(dim), GaussianMarginal{0.0, 1.0});
  return std::make_shared<BlockPrior>(layout, std::move(m));
}

std::shared_ptr<LogLikelihood> constant_likelihood(double value) {
  auto like = std::make_shared<LogLikelihood>();
  auto counter = like->evals;
  like->fn = [value, counter](const Eigen::VectorXd&) {
    counter->fetch_add(1);
    return value;
  };
  return like;
}

std::shared_ptr<LogLikelihood> conjugate_likelihood(const Eigen::VectorXd& data, double sd) {
  auto like = std::make_shared<LogLikelihood>();
  auto counter = like->evals;
  auto x = std::make_shared<Eigen::VectorXd>(data);
  like->fn = [x, sd, counter](const Eigen::VectorXd& theta) {
    counter->fetch_add(1);
    double ll = 0.0;
    for (Eigen::Index i = 0; i < x->size(); ++i)
      ll += stmc::test::normal_log_pdf((*x)[i], theta[0], sd);
    return ll;
  };
  return like;
}

std::shared_ptr<FailureFn> tail_failure(double threshold) {
  auto fail = std::make_shared<FailureFn>();
  auto counter = fail->evals;
  fail->fn = [threshold, counter](const Eigen::VectorXd& t) {
    counter->fetch_add(1);
    return t[0] / threshold;
  };
  return fail;
}

}  // namespace

TEST_CASE("constant likelihood: one level, exact evidence, posterior is the prior") {
  auto prior = std_normal_prior(2);
  auto like = constant_likelihood(-3.7);
  EngineConfig cfg;
  cfg.kernel = KernelKind::Rwm;
  cfg.n_chains = 512;
  cfg.seed = 4;
  cfg.workers = 2;

  const UpdatingResult res = run_updating(prior, like, cfg);
  CHECK(res.schedule.rows.size() == 2);  // init row + single level
  CHECK(res.schedule.rows.back().beta == 1.0);
  CHECK(res.log_evidence == doctest::Approx(-3.7).epsilon(1e-12));
  CHECK(estimate_evidence(res.schedule) == doctest::Approx(res.log_evidence));

  const double mean = res.posterior.samples.row(0).mean();
  CHECK(std::abs(mean) < 4.0 / std::sqrt(512.0));
}

TEST_CASE("beta is strictly increasing and ends exactly at one") {
  auto prior = std_normal_prior(1);
  RngStream data_rng(12);
  Eigen::VectorXd data(8);
  for (Eigen::Index i = 0; i < 8; ++i) data[i] = 0.9 + 0.5 * data_rng.normal();
  auto like = conjugate_likelihood(data, 0.5);

  EngineConfig cfg;
  cfg.kernel = KernelKind::Rwm;
  cfg.n_chains = 512;
  cfg.kappa_star = 0.5;  // force several levels
  cfg.seed = 21;
  const UpdatingResult res = run_updating(prior, like, cfg);
  REQUIRE(res.schedule.rows.size() >= 3);
  double prev = 0.0;
  for (std::size_t i = 1; i < res.schedule.rows.size(); ++i) {
    CHECK(res.schedule.rows[i].beta > prev);
    prev = res.schedule.rows[i].beta;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("conjugate Gaussian updating recovers posterior moments and evidence") {
  RngStream data_rng(31);
  Eigen::VectorXd data(6);
  for (Eigen::Index i = 0; i < 6; ++i) data[i] = 0.7 + 1.0 * data_rng.normal();
  const auto oracle = stmc::test::ConjugateOracle::from_data(data, 1.0);

  auto prior = std_normal_prior(1);
  auto like = conjugate_likelihood(data, 1.0);
  EngineConfig cfg;
  cfg.kernel = KernelKind::Rwm;
  cfg.n_chains = 1024;
  cfg.seed = 8;
  cfg.workers = 2;
  const UpdatingResult res = run_updating(prior, like, cfg);

  const double mean = res.posterior.samples.row(0).mean();
  const double var =
      (res.posterior.samples.row(0).array() - mean).square().mean();
  // Conservative effective sample size of N/8 for the error bands.
  const double se_mean = std::sqrt(oracle.posterior_var / 128.0);
  CHECK(std::abs(mean - oracle.posterior_mean) < 4.0 * se_mean);
  CHECK(var == doctest::Approx(oracle.posterior_var).epsilon(0.2));
  CHECK(std::abs(res.log_evidence - oracle.log_evidence) < 0.1);
}

TEST_CASE("evidence is consistent across annealing schedules") {
  // A sharp one-step schedule and a multi-level schedule must estimate the
  // same evidence in expectation.
  RngStream data_rng(77);
  Eigen::VectorXd data(4);
  for (Eigen::Index i = 0; i < 4; ++i) data[i] = 0.4 + data_rng.normal();
  auto prior = std_normal_prior(1);
  auto like = conjugate_likelihood(data, 1.0);

  const int reps = 60;
  Eigen::VectorXd one_level(reps), multi_level(reps);
  for (int r = 0; r < reps; ++r) {
    EngineConfig cfg;
    cfg.kernel = KernelKind::Rwm;
    cfg.n_chains = 256;
    cfg.seed = 1000 + static_cast<std::uint64_t>(r);
    cfg.kappa_star = 50.0;  // COV never binds: single level
    one_level[r] = run_updating(prior, like, cfg).log_evidence;
    cfg.kappa_star = 0.4;  // several levels
    multi_level[r] = run_updating(prior, like, cfg).log_evidence;
  }
  const double m1 = one_level.mean(), m2 = multi_level.mean();
  const double s1 = std::sqrt((one_level.array() - m1).square().sum() / (reps - 1));
  const double s2 = std::sqrt((multi_level.array() - m2).square().sum() / (reps - 1));
  const double se_diff = std::sqrt((s1 * s1 + s2 * s2) / reps);
  CHECK(std::abs(m1 - m2) < 3.0 * se_diff + 1e-9);
}

TEST_CASE("resampling is unbiased for the weighted mean") {
  RngStream rng(55);
  const int n = 32;
  Eigen::VectorXd values(n), weights(n);
  for (int i = 0; i < n; ++i) {
    values[i] = rng.normal();
    weights[i] = rng.uniform() + 0.01;
  }
  weights /= weights.sum();
  const double target = weights.dot(values);

  const int reps = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    double m = 0.0;
    for (const auto idx : multinomial_resample(weights, n, rng)) m += values[idx];
    m /= n;
    sum += m;
    sum_sq += m * m;
  }
  const double mean = sum / reps;
  const double sd = std::sqrt(sum_sq / reps - mean * mean);
  CHECK(std::abs(mean - target) < 4.0 * sd / std::sqrt(static_cast<double>(reps)));
}

TEST_CASE("full-support failure region: probability one in a single level") {
  auto prior = std_normal_prior(2);
  auto fail = std::make_shared<FailureFn>();
  fail->fn = [](const Eigen::VectorXd& t) { return 2.0 + 1e-6 * t[0]; };
  EngineConfig cfg;
  cfg.kernel = KernelKind::Rwm;
  cfg.n_chains = 128;
  cfg.seed = 3;
  const SubsetResult res = run_subset(prior, fail, nullptr, cfg);
  CHECK(res.p_hat == 1.0);
  CHECK(res.levels == 1);
}

TEST_CASE("subset simulation hits the analytic Gaussian tail") {
  auto prior = std_normal_prior(2);
  auto fail = tail_failure(4.5);
  const double truth = 0.5 * std::erfc(4.5 / std::sqrt(2.0));  // 3.3977e-6

  EngineConfig cfg;
  cfg.kernel = KernelKind::Romma;
  cfg.n_chains = 1024;
  cfg.kappa = 0.5;
  cfg.seed = 17;
  cfg.workers = 2;
  const SubsetResult res = run_subset(prior, fail, nullptr, cfg);

  CHECK(res.p_hat / truth < 1.6);
  CHECK(truth / res.p_hat < 1.6);
  CHECK(res.sigma_hat > 0.0);

  // Level count scales as ceil(log2 1/p) +- 1.
  const int expected_levels = static_cast<int>(std::ceil(std::log2(1.0 / truth)));
  CHECK(res.levels >= expected_levels - 1);
  CHECK(res.levels <= expected_levels + 1);

  // Budget accounting: the schedule decomposes the counter total exactly.
  CHECK(res.schedule.total_model_evals() == fail->eval_count());

  // All surviving samples are genuine failure samples.
  for (Eigen::Index i = 0; i < res.failure_population.size(); ++i)
    CHECK(res.failure_population.failure[i] >= 1.0);
}

TEST_CASE("posterior reliability with a flat likelihood reduces to prior reliability") {
  auto prior = std_normal_prior(2);
  auto fail = tail_failure(3.0);
  auto like = constant_likelihood(0.0);
  const double truth = 0.5 * std::erfc(3.0 / std::sqrt(2.0));

  EngineConfig cfg;
  cfg.kernel = KernelKind::Rwm;
  cfg.n_chains = 512;
  cfg.seed = 29;
  cfg.workers = 2;

  const SubsetResult prior_fail = run_subset(prior, fail, nullptr, cfg);
  const PosteriorReliabilityResult post = run_posterior_reliability(prior, like, fail, cfg);

  const double gap = std::abs(prior_fail.p_hat - post.subset.p_hat);
  const double band = 2.0 * (prior_fail.sigma_hat + post.subset.sigma_hat);
  CHECK(gap <= band + 0.2 * truth);
  CHECK(post.updating.schedule.rows.size() == 2);  // flat likelihood: single level
}

TEST_CASE("level budget exhaustion aborts with a diagnostic") {
  auto prior = std_normal_prior(2);
  auto fail = tail_failure(4.5);
  EngineConfig cfg;
  cfg.kernel = KernelKind::Rwm;
  cfg.n_chains = 128;
  cfg.max_levels = 3;
  cfg.seed = 5;
  CHECK_THROWS_AS(run_subset(prior, fail, nullptr, cfg), ConvergenceAbort);
}

TEST_CASE("evolve_level with correlation target one stops after the first block") {
  auto prior = std_normal_prior(2);
  const auto target = exponent_target(prior, nullptr, 0.0);
  EngineConfig cfg;
  cfg.kernel = KernelKind::Rwm;
  cfg.n_chains = 64;
  cfg.rho_target = 1.0;
  cfg.corr_block = 5;
  cfg.seed = 44;
  Population pop = sample_prior(*prior, cfg.seed, cfg.n_chains);
  const ProposalSpec prop = make_full_proposal(Eigen::MatrixXd::Identity(2, 2), 1.0);
  const EvolveResult ev = evolve_level(pop, target, prop, cfg, CorrMeasure::Cca, 1);
  CHECK(ev.chain_len == cfg.corr_block);
  CHECK_FALSE(ev.cap_hit);
}

TEST_CASE("engine runs are deterministic for a fixed seed regardless of workers") {
  auto prior = std_normal_prior(2);
  auto fail = tail_failure(3.0);
  EngineConfig cfg;
  cfg.kernel = KernelKind::Mma;
  cfg.n_chains = 256;
  cfg.seed = 61;
  cfg.workers = 1;
  const SubsetResult a = run_subset(prior, fail, nullptr, cfg);
  cfg.workers = 2;
  const SubsetResult b = run_subset(prior, fail, nullptr, cfg);
  CHECK(a.p_hat == b.p_hat);
  CHECK(a.sigma_hat == b.sigma_hat);
  CHECK(a.failure_population.samples == b.failure_population.samples);
}
